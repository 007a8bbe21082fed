import os
import sys

# The CMake test target points these at the built extension and the package
# source so the suite runs without an install step.
for var in ("CPALIGN_EXT_DIR", "CPALIGN_PKG_DIR"):
    path = os.environ.get(var)
    if path and path not in sys.path:
        sys.path.insert(0, path)
