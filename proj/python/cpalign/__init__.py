"""Cut-paste dataset balancing and instance alignment toolkit."""

try:
    from ._cpalign import *  # noqa: F401,F403  installed package layout
except ImportError:
    # Build-tree layout: the extension sits next to the build artifacts and
    # is put on sys.path by the test harness.
    from _cpalign import *  # noqa: F401,F403
