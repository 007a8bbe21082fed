import math
import random

import pytest

import cpalign as cp


def noise_image(w, h, seed):
    rng = random.Random(seed)
    img = cp.Image(w, h)
    img.pixels = bytes(rng.randrange(30, 220) for _ in range(w * h * 3))
    return img


def record(image_id, w, h, boxes, seed, domain=cp.Domain.source):
    rec = cp.ImageRecord()
    rec.image_id = image_id
    rec.width = w
    rec.height = h
    rec.pixels = noise_image(w, h, seed)
    rec.annotations = [cp.Annotation(cls, cp.BBox(*xyxy)) for cls, xyxy in boxes]
    rec.domain = domain
    return rec


def tiny_source():
    ds = cp.DetectionDataset()
    ds.classes = ["alpha", "beta"]
    images = []
    for i in range(2):  # dense under r=2: three boxes each
        boxes = [(0, (2 + 9 * k, 2, 9 + 9 * k, 9)) for k in range(3)]
        images.append(record(f"dense_{i}", 64, 64, boxes, 10 + i))
    for i in range(3):
        images.append(record(f"sparse_{i}", 64, 64, [(1, (20, 20, 27, 27))], 20 + i))
    images.append(record("empty_0", 64, 64, [], 30))
    ds.images = images
    return ds


def tiny_target():
    ds = cp.DetectionDataset()
    ds.classes = ["alpha", "beta"]
    ds.domain = cp.Domain.target
    ds.images = [
        record("tgt_0", 64, 64, [(0, (4, 4, 11, 11)), (1, (30, 30, 37, 37))], 99,
               cp.Domain.target)
    ]
    return ds


def test_balance_keeps_size_and_reaches_target():
    cfg = cp.BalanceConfig()
    cfg.r = 2
    cfg.seed = 5
    res = cp.balance_dataset(tiny_source(), tiny_target(), cfg)
    assert len(res.dataset.images) == 6
    counts = cp.compute_stats(res.dataset, 2).per_class_count
    assert counts[1] >= math.ceil(0.9 * 6)
    assert res.report.paste_failures == 0
    rows = {row.class_name: row for row in res.report.per_class}
    assert rows["beta"].achieved == rows["beta"].planned
    assert "per_class" in res.report.to_json()


def test_dataset_roundtrip(tmp_path):
    ds = tiny_source()
    manifest = cp.save_dataset(ds, tmp_path / "out")
    loaded = cp.load_dataset(manifest)
    assert [r.image_id for r in loaded.images] == [r.image_id for r in ds.images]
    assert loaded.images[0].pixels.pixels == ds.images[0].pixels.pixels
    assert len(loaded.images[0].annotations) == 3
    picked = cp.sample_random_images(loaded, 2, seed=1)
    assert len(picked.images) == 2


def test_loss_identities_and_gradients():
    def instance(idx, cls, values):
        f = cp.InstanceFeature()
        f.image_id = f"img_{idx % 2}"
        f.instance_index = idx
        f.class_id = cls
        f.level = 0
        f.vector = values
        return f

    rng = random.Random(3)
    levels = []
    for lvl in range(3):
        inst = []
        idx = 0
        for cls in range(3):
            for _ in range(2):
                inst.append(instance(idx, cls, [rng.uniform(-1, 1) for _ in range(8)]))
                idx += 1
        levels.append(inst)
    heads = [cp.ClassifierHead.zeros(3, 8) for _ in range(3)]

    res = cp.i2da_loss(levels, heads)
    assert res.classification == pytest.approx(3 * math.log(3), abs=1e-9)
    assert math.isfinite(res.total)
    assert len(res.grads[0]) == 6 and len(res.grads[0][0]) == 8

    same = [instance(0, 0, [1.0, 2.0, 3.0]), instance(1, 0, [1.0, 2.0, 3.0])]
    assert cp.similarity_loss(same).value == pytest.approx(0.0, abs=1e-12)


def test_metrics_fixture():
    a = cp.BBox(0, 0, 10, 10)
    far = cp.BBox(50, 50, 60, 60)
    gts = [cp.GroundTruthBox("m", 0, a), cp.GroundTruthBox("m", 1, far)]
    dets = [cp.Detection("m", 0, a, 0.9), cp.Detection("m", 1, a, 0.8)]
    report = cp.map_suite(dets, gts)
    assert report.map50 == pytest.approx(0.5)
    assert cp.average_precision(dets[:1], gts[:1], 0.5) == 1.0
    assert cp.iou(a, a) == 1.0


def test_compose_schedule():
    cfg = cp.ComposeConfig()
    cfg.num_batches = 100
    cfg.seed = 9
    sched = cp.compose_schedule([f"s{i}" for i in range(5)],
                                [f"a{i}" for i in range(7)],
                                [f"t{i}" for i in range(2)], cfg)
    assert len(sched.batches) == 100
    for batch in sched.batches:
        assert sum(1 for slot in batch if slot.pool == cp.Domain.target) == 1
    assert sched.to_jsonl().count("\n") == 100


def test_feature_dump_roundtrip(tmp_path):
    rec = cp.MultiLevelFeatures()
    rec.image_id = "img"
    rec.image_w = 32
    rec.image_h = 32
    levels = []
    for lvl in range(3):
        fm = cp.FeatureMap(2, 4, 4)
        fm.data = [float(i) / 7.0 for i in range(2 * 4 * 4)]
        levels.append(fm)
    rec.levels = levels
    rec.gt = [cp.InstanceLabel(0, cp.BBox(0, 0, 16, 32))]

    path = tmp_path / "feats.bin"
    cp.write_feature_dump(path, [rec])
    back = cp.read_feature_dump(path)
    assert len(back) == 1
    assert back[0].levels[0].data == rec.levels[0].data

    pooled = cp.pool_instances(back[0], grid_size=4)
    assert len(pooled) == 3
    up = cp.upsample_level(back[0].levels[0], 8)
    assert (up.channels, up.height, up.width) == (2, 8, 8)
