"""One test per acceptance criterion; each records a PASS/FAIL line (see conftest)."""
import json
import time

import numpy as np

from facepad.cli import main
from facepad.data import PreprocessSpec, arrays_from_images, synth_dataset, write_synth_dataset
from facepad.errors import CorruptHeaderError, ShapeMismatchError, TruncatedPayloadError
from facepad.eval import ScoreSet, cross_eval, eer, hter
from facepad.gradcheck import check_layers, check_model
from facepad.model import DualChannelNet, ModelConfig, decode_checkpoint, encode_checkpoint
from facepad.nn.optim import OptimizerState
from facepad.texture import coalbp_histogram, decode_cache, describe_image, encode_cache, \
    lbp_histogram, lpq_histogram
from facepad.train import predict, train

import oracles

# target deep-channel rows (layer, parameters) and fusion rows
DEEP_PARAMS = [("conv1", 896), ("conv2", 9248), ("bn1", 128), ("dropout1", 0), ("pool1", 0),
               ("conv3", 18_496), ("conv4", 36_928), ("bn2", 256), ("dropout2", 0), ("pool2", 0),
               ("conv5", 204_928), ("conv6", 409_728), ("bn3", 512), ("dropout3", 0), ("pool3", 0),
               ("dense1", 12_845_568), ("bn4", 2048), ("embedding", 262_656)]
DEEP_TOTAL = 13_791_392
HEAD_PARAMS = [524_800, 2048, 131_328, 513]

DEEP_CHAIN = [(160, 160, 3), (158, 158, 32), (156, 156, 32), (78, 78, 32), (76, 76, 64),
              (74, 74, 64), (37, 37, 64), (33, 33, 128), (29, 29, 128), (14, 14, 128),
              (25088,), (512,)]


def test_criterion_01_architecture_table(tmp_path, criterion):
    t0 = time.perf_counter()
    assert main(["inspect", "--out", str(tmp_path / "inspect.json")]) == 0
    elapsed = time.perf_counter() - t0
    data = json.loads((tmp_path / "inspect.json").read_text())
    deep = {r["name"]: r["params"] for r in data["blocks"]["deep"]["rows"]}
    head = [r["params"] for r in data["blocks"]["head"]["rows"]]
    deep_ok = all(deep.get(n) == p for n, p in DEEP_PARAMS) and data["blocks"]["deep"]["total"] == DEEP_TOTAL
    bad_head = [(want, got) for want, got in zip(HEAD_PARAMS, head) if want != got]
    ok = deep_ok and not bad_head and len(head) == len(HEAD_PARAMS) and elapsed < 1.0
    criterion(1, "inspect reproduces the deep and fusion parameter tables", ok,
              f"deep rows+total {'match' if deep_ok else 'DIFFER'}; fusion mismatches (want, got) "
              f"{bad_head}; {elapsed:.2f}s")
    assert ok


def test_criterion_02_forward_shape_chain(criterion):
    model = DualChannelNet(ModelConfig())
    rows = model.blocks["deep"].trace(np.zeros((1, 160, 160, 3), np.float32))
    chain = [rows[0][1]]
    for _, _, out in rows:
        if out != chain[-1]:
            chain.append(out)
    ok = chain == DEEP_CHAIN
    criterion(2, "deep-channel shape chain 160x160x3 -> 512", ok, " -> ".join("x".join(map(str, s)) for s in chain))
    assert ok


def test_criterion_03_descriptor_dimensions(criterion):
    vec = describe_image(np.random.default_rng(0).integers(0, 256, (64, 64, 3)).astype(np.uint8))
    got = (vec.total("LBP"), vec.total("CoALBP"), vec.total("LPQ"))
    ok = got == (354, 6144, 1536)
    criterion(3, "descriptor totals LBP/CoALBP/LPQ", ok, f"{got}, vector length {len(vec)}")
    assert ok


def test_criterion_04_texture_oracles(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = 0
    for i in range(100):
        # every fourth plane has few grey levels, to exercise ties
        hi = 4 if i % 4 == 0 else 256
        p = rng.integers(0, hi, (16, 16)).astype(np.uint8)
        bad += not np.array_equal(lbp_histogram(p), oracles.lbp_hist(p))
        bad += not np.array_equal(coalbp_histogram(p), oracles.coalbp_hist(p))
        bad += not np.array_equal(lpq_histogram(p), oracles.lpq_hist(p))
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 60
    criterion(4, "LBP/CoALBP/LPQ equal loop oracles on 100 planes", ok, f"{bad} mismatches, {elapsed:.1f}s")
    assert ok


def test_criterion_05_gradient_check(criterion):
    t0 = time.perf_counter()
    errors = check_layers(ModelConfig.tiny())
    errors |= {f"default:{k}": v for k, v in check_layers(ModelConfig(input_size=64), max_coords=32).items()}
    errors |= check_model(ModelConfig.tiny())
    elapsed = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    ok = errors[worst] <= 1e-3 and elapsed < 300
    criterion(5, "finite differences on every layer and the tiny model", ok,
              f"{len(errors)} tensors, max rel err {errors[worst]:.2e} at {worst}, {elapsed:.0f}s")
    assert ok


def _random_set(rng):
    n = int(rng.integers(2, 60))
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    scores = rng.random(n)
    if rng.random() < 0.5:
        scores = np.round(scores * rng.integers(2, 12)) / 12
    return ScoreSet.from_arrays(labels, scores)


def test_criterion_06_metric_oracles(criterion):
    rng = np.random.default_rng(6)
    worst, transform_bad = 0.0, 0
    transforms = [lambda s: s ** 2, lambda s: np.sqrt(s), lambda s: 0.1 + 0.8 * s,
                  lambda s: 1 / (1 + np.exp(-8 * (s - 0.3)))]
    for i in range(1000):
        dev, test = _random_set(rng), _random_set(rng)
        e_b = oracles.eer_brute(dev.labels.tolist(), dev.scores.tolist())
        h_b, _ = oracles.hter_brute(dev.labels.tolist(), dev.scores.tolist(),
                                    test.labels.tolist(), test.scores.tolist())
        rep = hter(dev, test)
        worst = max(worst, abs(eer(dev)[0] - e_b), abs(rep.hter - h_b))
        f = transforms[i % len(transforms)]
        g = lambda s: ScoreSet.from_arrays(s.labels, f(s.scores))
        rep_t = hter(g(dev), g(test))
        transform_bad += eer(g(dev))[0] != eer(dev)[0] or rep_t.hter != rep.hter or rep_t.eer != rep.eer
    ok = worst <= 1e-9 and transform_bad == 0
    criterion(6, "EER/HTER equal brute force on 1000 sets, monotone invariance", ok,
              f"max diff {worst:.1e}, {transform_bad} invariance failures")
    assert ok


def _arrays(n_gen, n_spoof, seed, size, profile="A", subject_offset=0):
    images, records = synth_dataset(n_gen, n_spoof, seed, size, profile, subject_offset=subject_offset)
    return arrays_from_images(images, [r.label for r in records], [r.path for r in records],
                              spec=PreprocessSpec(side=size))


def test_criterion_07_synthetic_end_to_end(criterion):
    t0 = time.perf_counter()
    tr = _arrays(1000, 1000, seed=7, size=64)
    te = _arrays(250, 250, seed=8, size=64, subject_offset=100)
    model = DualChannelNet(ModelConfig(input_size=64, seed=7))
    history = []

    def on_epoch(epoch, m):
        history.append(eer((te.labels, predict(m, te)))[0])

    train(model, tr, epochs=10, batch_size=32, seed=7, on_epoch=on_epoch)
    elapsed = time.perf_counter() - t0
    final = history[-1]
    ok = final <= 0.05 and elapsed < 1800
    criterion(7, "dual model on synthetic 2000/500 at 64px", ok,
              f"test EER per epoch {[round(100 * e, 2) for e in history]}%, {elapsed / 60:.1f} min")
    assert ok


def test_criterion_08_ablation(criterion, capsys):
    size, epochs = 64, 5
    data = {
        "A": {"train": _arrays(400, 400, 11, size, "A"), "dev": _arrays(100, 100, 12, size, "A", 100),
              "test": _arrays(100, 100, 13, size, "A", 200)},
        "B": {"test": _arrays(100, 100, 14, size, "B", 300)},
    }
    scores = {}
    for method in ("dual", "deep", "wide"):
        model = DualChannelNet(ModelConfig(input_size=size, variant=method, seed=11))
        train(model, data["A"]["train"], epochs=epochs, seed=11)
        sets = {}
        for name, splits in data.items():
            sets[name] = {split: ScoreSet(arr.ids, arr.labels.astype(int), predict(model, arr))
                          for split, arr in splits.items() if split != "train"}
        scores[method] = {"A": sets}
    result = cross_eval(scores, modes=("frame",))
    table = result.ablation("frame")
    with capsys.disabled():
        print("\n" + table)
    cross = {m: result.get(m, "A", "B").eer for m in scores}
    best_single = min(cross["deep"], cross["wide"])
    ok = cross["dual"] <= best_single + 0.02
    criterion(8, "ablation table; dual cross-fixture EER <= best single + 2pp", ok,
              ", ".join(f"{m} A->B EER {100 * v:.2f}%" for m, v in cross.items())
              + ", intra " + ", ".join(f"{m} {100 * result.get(m, 'A', 'A').eer:.2f}%" for m in scores))
    assert "dual" in table and "deep" in table and "wide" in table
    assert ok


def test_criterion_09_determinism(tmp_path, criterion):
    write_synth_dataset(tmp_path / "d", {"train": (20, 20)}, seed=3, size=52)
    manifest = tmp_path / "d" / "manifest.csv"

    def run_once():
        assert main(["extract", "--manifest", str(manifest), "--out", str(tmp_path / "f.cache"),
                     "--tiny", "--seed", "5"]) == 0
        assert main(["train", "--manifest", str(manifest), "--cache", str(tmp_path / "f.cache"),
                     "--tiny", "--epochs", "1", "--batch-size", "8", "--seed", "5",
                     "--checkpoint", str(tmp_path / "m.ckpt")]) == 0
        return (tmp_path / "f.cache").read_bytes(), (tmp_path / "m.ckpt").read_bytes()

    cache_a, ckpt_a = run_once()
    cache_b, ckpt_b = run_once()
    ok = cache_a == cache_b and ckpt_a == ckpt_b
    criterion(9, "same seed and config give byte-identical cache and checkpoint", ok,
              f"cache {len(cache_a)} B {'same' if cache_a == cache_b else 'DIFFERENT'}, "
              f"checkpoint {len(ckpt_a)} B {'same' if ckpt_a == ckpt_b else 'DIFFERENT'}")
    assert ok


def _expect(exc, f, *args):
    try:
        f(*args)
    except exc:
        return True
    except Exception:
        return False
    return False


def test_criterion_10_file_round_trips(criterion):
    checks = {}
    model = DualChannelNet(ModelConfig())
    raw = encode_checkpoint(model, None, {"note": "default"})
    back = decode_checkpoint(raw).build_model()
    checks["default checkpoint bitwise"] = all(
        v.tobytes() == back.state()[k].tobytes() for k, v in model.state().items())
    tiny = DualChannelNet(ModelConfig.tiny())
    opt = OptimizerState()
    opt.velocities = {k: np.random.default_rng(1).standard_normal(v.shape).astype(np.float32)
                      for k, v in tiny.params().items()}
    raw_t = encode_checkpoint(tiny, opt)
    ck = decode_checkpoint(raw_t)
    checks["tiny checkpoint re-encodes identically"] = encode_checkpoint(ck.build_model(), ck.optimizer_state()) == raw_t
    checks["checkpoint bad magic"] = _expect(CorruptHeaderError, decode_checkpoint, b"XXXX" + raw_t[4:])
    checks["checkpoint truncated"] = _expect(TruncatedPayloadError, decode_checkpoint, raw_t[:-3])
    checks["checkpoint wrong shapes"] = _expect(
        ShapeMismatchError, decode_checkpoint,
        raw_t.replace(b'"embedding_size":64', b'"embedding_size":65'))

    rng = np.random.default_rng(10)
    recs = [(f"x{i}", describe_image(rng.integers(0, 256, (24, 24, 3)).astype(np.uint8))) for i in range(5)]
    raw_c = encode_cache(recs, {"k": 1})
    back_c, _ = decode_cache(raw_c)
    checks["cache bitwise"] = all(a[1].values.tobytes() == b[1].values.tobytes() for a, b in zip(recs, back_c))
    checks["cache re-encodes identically"] = encode_cache(back_c, {"k": 1}) == raw_c
    checks["cache bad magic"] = _expect(CorruptHeaderError, decode_cache, b"XXXX" + raw_c[4:])
    checks["cache truncated"] = _expect(TruncatedPayloadError, decode_cache, raw_c[:-5])
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    criterion(10, "checkpoint and cache round-trips; corrupt files raise typed errors", ok,
              f"{len(checks) - len(failed)}/{len(checks)} checks" + (f", failed {failed}" if failed else ""))
    assert ok
