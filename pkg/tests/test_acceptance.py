"""End-to-end acceptance suite.

Every gate prints one `[PASS]/[FAIL] criterion N` line (run with `-s` to see
them live) before asserting, so a transcript doubles as a checklist. The two
desk sweeps and the determinism rerun dominate the wall clock; everything
else is oracle checks that finish in seconds.
"""

import numpy as np
import pytest

from rfxfer.dataspec import MasterSpec, generate_master, read_sigmf, write_sigmf
from rfxfer.harness import SweepConfig, plan_sweep, run_sweep, to_transfer_records
from rfxfer.nnkernel import (
    LayerSpec,
    Network,
    OptimizerState,
    adam_step,
    build_network,
    cnn_specs,
    cross_entropy,
    from_network,
    load_checkpoint,
    save_checkpoint,
)
from rfxfer.sigsynth import apply_awgn, apply_fo, make_modclass, measure_snr, synth_fsk, synth_linear
from rfxfer.statfit import (
    agreement_frequency,
    fit_predictor,
    linear_fit,
    pearson_r,
    predict_accuracy,
    weighted_tau,
)
from rfxfer.tmetrics import leep_from_probs, logme_from_features


def _line(tag, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    msg = f"[{status}] criterion {tag}: {detail}" if detail else f"[{status}] criterion {tag}"
    print(msg)
    assert ok, msg


# --------------------------------------------------------- 1: numeric kernel


def _micro_net():
    specs = [
        LayerSpec.conv2d(4, (1, 5)),
        LayerSpec.relu(),
        LayerSpec.conv2d(3, (2, 5)),
        LayerSpec.relu(),
        LayerSpec.flatten(),
        LayerSpec.linear(6),
        LayerSpec.linear(3),
    ]
    return Network.build(specs, input_shape=(2, 16), seed=2, dtype=np.float64)


def test_criterion_1_numeric_kernel():
    net = _micro_net()
    x = np.random.default_rng(3).standard_normal((5, 2, 16))
    y = np.array([0, 1, 2, 0, 1])
    logits, cache = net.forward(x, training=True)
    _, dlogits = cross_entropy(logits, y)
    grads = net.backward(cache, dlogits)

    def loss_at():
        out, _ = net.forward(x, training=True)
        return cross_entropy(out, y)[0]

    eps = 1e-5
    worst = 0.0
    check_rng = np.random.default_rng(0)
    for p, g in zip(net.flat_trainable(), grads):
        picks = check_rng.choice(p.size, size=min(10, p.size), replace=False)
        for flat_idx in picks:
            ix = np.unravel_index(flat_idx, p.shape)
            orig = p[ix]
            p[ix] = orig + eps
            hi = loss_at()
            p[ix] = orig - eps
            lo = loss_at()
            p[ix] = orig
            fd = (hi - lo) / (2 * eps)
            worst = max(worst, abs(fd - g[ix]) / max(1e-12, abs(fd) + abs(g[ix])))

    w = [np.array([0.0])]
    state = OptimizerState.for_params(w, lr=0.001)
    adam_step(state, w, [np.array([2.0])])
    adam_err = abs(w[0][0] - (-0.001 * 2.0 / (2.0 + 1e-8)))

    _line(
        1,
        worst < 1e-4 and adam_err <= 1e-9,
        f"max grad rel err {worst:.2e} (< 1e-4), adam step err {adam_err:.1e} (<= 1e-9)",
    )


# --------------------------------------------------------- 2: signal fidelity


def test_criterion_2_signal_fidelity():
    mod = make_modclass("QPSK", {"excess_bandwidth": 0.35, "symbol_overlap": 3})
    clean = synth_linear(mod, 64, 2, np.random.default_rng(9))
    snr_errs = {}
    for snr_db in (-10.0, 0.0, 10.0, 20.0):
        measured = [
            measure_snr(clean, apply_awgn(clean, snr_db, np.random.default_rng(3000 + i)))
            for i in range(100)
        ]
        snr_errs[snr_db] = abs(float(np.mean(measured)) - snr_db)
    snr_ok = all(e <= 0.5 for e in snr_errs.values())

    # constant-envelope carrier keeps the per-sample phase of y * conj(x)
    # well defined, so the offset falls out of a straight-line fit
    base = synth_fsk(make_modclass("GFSK5k", {"beta": 0.4, "symbol_overlap": 3}),
                     128, 2, np.random.default_rng(21))
    fo_rels = {}
    for fo in (-0.08, 0.01, 0.05):
        shifted = apply_fo(base, fo, phase0=0.3)
        rot = shifted.to_complex() * np.conj(base.to_complex())
        slope = np.polyfit(np.arange(base.n), np.unwrap(np.angle(rot)), 1)[0]
        fo_rels[fo] = abs(slope / (2 * np.pi) - fo) / abs(fo)
    fo_ok = all(r <= 0.01 for r in fo_rels.values())

    env_worst = 0.0
    for name, params in [("FSK5k", {}), ("FSK75k", {}), ("MSK", {}),
                         ("GMSK", {"beta": 0.35, "symbol_overlap": 3}),
                         ("GFSK5k", {"beta": 0.4, "symbol_overlap": 3}),
                         ("GFSK75k", {"beta": 0.5, "symbol_overlap": 2})]:
        frame = synth_fsk(make_modclass(name, params), 64, 2, np.random.default_rng(5))
        env_worst = max(env_worst, float(np.max(np.abs(np.abs(frame.to_complex()) - 1.0))))
    env_ok = env_worst < 1e-12

    _line(
        2,
        snr_ok and fo_ok and env_ok,
        f"snr err {max(snr_errs.values()):.3f} dB (<= 0.5), "
        f"fo rel err {max(fo_rels.values()):.2e} (<= 0.01), "
        f"envelope dev {env_worst:.1e} (< 1e-12)",
    )


# -------------------------------------------------------------- 3: LEEP oracle


def test_criterion_3_leep_oracle():
    hand = leep_from_probs([[0.8, 0.2], [0.4, 0.6]], np.array([0, 1]), 2)
    hand_ok = abs(hand - (-0.53899)) <= 1e-5

    rng = np.random.default_rng(7)
    const_ok = True
    for _ in range(50):
        n, c_s, c_t = int(rng.integers(5, 40)), int(rng.integers(2, 6)), int(rng.integers(2, 5))
        probs = np.tile(rng.dirichlet(np.ones(c_s)), (n, 1))
        labels = rng.integers(0, c_t, n)
        marginal = np.bincount(labels, minlength=c_t) / n
        seen = marginal[marginal > 0]
        entropy_value = float(np.sum(seen * np.log(seen)))
        if abs(leep_from_probs(probs, labels, c_t) - entropy_value) > 1e-9:
            const_ok = False
    sign_ok = True
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        probs = rng.dirichlet(np.ones(int(rng.integers(2, 8))), size=n)
        if leep_from_probs(probs, rng.integers(0, 3, n), 3) > 1e-12:
            sign_ok = False

    _line(
        3,
        hand_ok and const_ok and sign_ok,
        f"hand instance {hand:.6f} (-0.53899 +- 1e-5), "
        f"constant-predictor entropy identity {const_ok}, 1000x nonpositive {sign_ok}",
    )


# ------------------------------------------------------------- 4: LogME oracle


def _grid_evidence(f, gram, eye, y, n, dim, a, b):
    system = a * eye + b * gram
    m = np.linalg.solve(system, b * (f.T @ y))
    r = f @ m - y
    return (
        0.5 * dim * np.log(a)
        + 0.5 * n * np.log(b)
        - 0.5 * n * np.log(2 * np.pi)
        - 0.5 * b * (r @ r)
        - 0.5 * a * (m @ m)
        - 0.5 * np.linalg.slogdet(system)[1]
    )


def _grid_logme(features, labels, n_classes, grid=60, lo=1e-4, hi=1e4):
    """Brute-force evidence maximization on a log grid (direct solve, no
    spectral shortcut), refined once around the coarse argmax."""
    f = np.asarray(features, dtype=np.float64)
    n, dim = f.shape
    gram = f.T @ f
    eye = np.eye(dim)
    coarse = np.logspace(np.log10(lo), np.log10(hi), grid)
    step = np.log10(hi / lo) / (grid - 1)
    scores = []
    for c in range(n_classes):
        y = (labels == c).astype(np.float64)
        best, best_ab = -np.inf, (coarse[0], coarse[0])
        for a in coarse:
            for b in coarse:
                value = _grid_evidence(f, gram, eye, y, n, dim, a, b)
                if value > best:
                    best, best_ab = value, (a, b)
        la, lb = np.log10(best_ab[0]), np.log10(best_ab[1])
        for a in np.logspace(la - 1.5 * step, la + 1.5 * step, grid):
            for b in np.logspace(lb - 1.5 * step, lb + 1.5 * step, grid):
                best = max(best, _grid_evidence(f, gram, eye, y, n, dim, a, b))
        scores.append(best / n)
    return float(np.mean(scores))


def test_criterion_4_logme_oracle():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(10):
        f = rng.normal(size=(20, 3))
        labels = rng.integers(0, 2, 20)
        if len(np.unique(labels)) < 2:
            labels[0] = 1 - labels[0]
        worst = max(worst, abs(logme_from_features(f, labels, 2) - _grid_logme(f, labels, 2)))
    grid_ok = worst <= 1e-3

    rng = np.random.default_rng(17)
    wins = trials = 0
    while trials < 20:
        f = rng.normal(size=(50, 4))
        labels = np.argmax(f @ rng.normal(size=(4, 3)), axis=1)
        if len(np.unique(labels)) < 3:
            continue
        trials += 1
        if logme_from_features(f, labels, 3) > logme_from_features(f, rng.permutation(labels), 3):
            wins += 1

    _line(
        4,
        grid_ok and wins == 20,
        f"fixed point vs grid max err {worst:.2e} (<= 1e-3) over 10 instances, "
        f"separable beats shuffled {wins}/20",
    )


# -------------------------------------------------------- 5: statistics oracles


def _tau_oracle(x, y):
    """Literal all-pairs transcription of the weighted tau definition."""
    n = len(x)

    def weights(primary, secondary):
        order = sorted(range(n), key=lambda i: (-primary[i], -secondary[i], i))
        w = [0.0] * n
        for rank, i in enumerate(order):
            w[i] = 1.0 / (1.0 + rank)
        return w

    def one_sided(w):
        num = den = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                pair_w = w[i] + w[j]
                den += pair_w
                sx = int(x[i] > x[j]) - int(x[i] < x[j])
                sy = int(y[i] > y[j]) - int(y[i] < y[j])
                num += sx * sy * pair_w
        return num / den

    return 0.5 * (one_sided(weights(x, y)) + one_sided(weights(y, x)))


def test_criterion_5_statistics_oracles():
    rng = np.random.default_rng(3)
    tau_worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        x = rng.integers(0, 4, n).astype(float)
        y = rng.integers(0, 4, n).astype(float)
        if np.all(x == x[0]) and np.all(y == y[0]):
            x[0] += 1.0
        tau_worst = max(tau_worst, abs(weighted_tau(x, y) - _tau_oracle(list(x), list(y))))
    tau_ok = tau_worst <= 1e-12

    pearson_ok = abs(pearson_r([1, 2, 3, 4], [1, 3, 2, 4]) - 0.8) <= 1e-12

    rng = np.random.default_rng(7)
    x = rng.normal(size=40)
    y = rng.normal(size=40)
    beta0, beta1 = linear_fit(x, y)
    resid_mean = abs(float(np.mean(y - (beta0 * x + beta1))))

    _line(
        5,
        tau_ok and pearson_ok and resid_mean < 1e-9,
        f"tau vs enumeration max err {tau_worst:.1e} over 100 instances, "
        f"pearson hand case ok {pearson_ok}, OLS residual mean {resid_mean:.1e} (< 1e-9)",
    )


# ------------------------------------------------- 6: full-scale plan arithmetic


def test_criterion_6_plan_arithmetic():
    counts = {}
    for name, cfg in [
        ("SNR", SweepConfig.paper_snr()),
        ("FO", SweepConfig.paper_fo()),
        ("SNR_FO", SweepConfig.paper_snr_fo()),
    ]:
        plan = plan_sweep(cfg)
        counts[name] = (len(plan.windows), len(plan.jobs))
    plans_ok = counts == {"SNR": (26, 650), "FO": (31, 930), "SNR_FO": (25, 600)}

    net = Network.build(cnn_specs(23, conv_channels=(1500, 96), hidden=65), seed=0)
    head = net.layers[net.last_linear_index()]
    head_params = head.weight.size + head.bias.size

    _line(
        6,
        plans_ok and head_params == 1518,
        f"windows/jobs {counts}, head trainable params {head_params} (== 1518)",
    )


# ------------------------------------------------------- 7: desk trend suite


ACCEPT = dict(
    master_per_class=12000,
    frame_len=128,
    pretrain_train_per_class=1200,
    pretrain_val_per_class=240,
    train_per_class=150,
    val_per_class=50,
    test_per_class=100,
    conv_channels=(64, 32),
    hidden=32,
    dropout=0.5,
    epochs=15,
    transfer_epochs=50,
    batch=64,
    methods=("HEAD",),
    seed=0,
)


@pytest.fixture(scope="module")
def desk_snr(tmp_path_factory):
    cfg = SweepConfig(axis="SNR", **ACCEPT)
    workdir = tmp_path_factory.mktemp("desk_snr")
    return cfg, run_sweep(cfg, workdir), workdir


@pytest.fixture(scope="module")
def desk_fo(tmp_path_factory):
    cfg = SweepConfig(axis="FO", **ACCEPT)
    workdir = tmp_path_factory.mktemp("desk_fo")
    return cfg, run_sweep(cfg, workdir), workdir


def _matrix(result):
    """5x5 accuracy heatmap: SELF on the diagonal, HEAD off it."""
    labels = [w.label for w in result["windows"]]
    idx = {lab: i for i, lab in enumerate(labels)}
    mat = np.full((len(labels), len(labels)), np.nan)
    for r in result["records"]:
        if r["status"] != "ok":
            continue
        want = "SELF" if r["source"] == r["target"] else "HEAD"
        if r["method"] == want:
            mat[idx[r["source"]], idx[r["target"]]] = r["accuracy"]
    return mat


def _pooled_head_records(desk_snr, desk_fo):
    pool = []
    for _, result, _ in (desk_snr, desk_fo):
        pool += [r for r in to_transfer_records(result["records"]) if r.method == "HEAD"]
    return pool


def test_criterion_7a_diagonal_dominance(desk_snr, desk_fo):
    detail = []
    ok = True
    for name, fixture in (("SNR", desk_snr), ("FO", desk_fo)):
        mat = _matrix(fixture[1])
        dists = [abs(int(np.nanargmax(mat[:, j])) - j) for j in range(mat.shape[1])]
        ok = ok and max(dists) <= 1
        detail.append(f"{name} best-source distances {dists}")
    _line("7a", ok, "; ".join(detail) + " (all <= 1)")


def test_criterion_7b_snr_asymmetry(desk_snr):
    mat = _matrix(desk_snr[1])
    n = mat.shape[0]
    up = np.mean([mat[i, j] for i in range(n) for j in range(n) if i < j])
    lo = np.mean([mat[i, j] for i in range(n) for j in range(n) if i > j])
    diff = float(up - lo)
    _line(
        "7b",
        diff >= 0.05,
        f"mean low->high {up:.4f} vs high->low {lo:.4f}, margin {diff:+.4f} (>= 0.05)",
    )


def test_criterion_7c_fo_symmetry(desk_fo):
    mat = _matrix(desk_fo[1])
    n = mat.shape[0]
    gaps = [abs(mat[i, j] - mat[j, i]) for i in range(n) for j in range(n) if i != j]
    mean_gap = float(np.mean(gaps))
    _line("7c", mean_gap < 0.1, f"mean |heatmap - transpose| {mean_gap:.4f} (< 0.1)")


def test_criterion_7d_metric_validity(desk_snr, desk_fo):
    pool = _pooled_head_records(desk_snr, desk_fo)
    acc = [r.accuracy for r in pool]
    stats = {}
    for metric in ("LEEP", "LOGME"):
        scores = [getattr(r, metric.lower()) for r in pool]
        stats[metric] = (pearson_r(scores, acc), weighted_tau(scores, acc))
    cross = pearson_r([r.leep for r in pool], [r.logme for r in pool])
    ok = all(r > 0.5 and t > 0.3 for r, t in stats.values()) and cross > 0.5
    _line(
        "7d",
        ok,
        f"n={len(pool)}, "
        f"LEEP r={stats['LEEP'][0]:.3f} tau={stats['LEEP'][1]:.3f}, "
        f"LogME r={stats['LOGME'][0]:.3f} tau={stats['LOGME'][1]:.3f} "
        f"(r > 0.5, tau > 0.3), r(LEEP,LogME)={cross:.3f} (> 0.5)",
    )


def test_criterion_7e_predictor_calibration(desk_snr, desk_fo):
    pool = _pooled_head_records(desk_snr, desk_fo)
    order = np.random.default_rng(2026).permutation(len(pool))
    n_fit = int(round(0.7 * len(pool)))
    fit_rows = [pool[i] for i in order[:n_fit]]
    hold_rows = [pool[i] for i in order[n_fit:]]
    coverages = {}
    predictors = {}
    for metric in ("LEEP", "LOGME"):
        predictor = fit_predictor(fit_rows, metric, method="HEAD")
        predictors[metric] = predictor
        inside = 0
        for r in hold_rows:
            pred = predict_accuracy(predictor, getattr(r, metric.lower()), confidence=0.95)
            inside += pred.lower <= r.accuracy <= pred.upper
        coverages[metric] = inside / len(hold_rows)
    agree = agreement_frequency(hold_rows, predictors["LEEP"], predictors["LOGME"])
    ok = all(c >= 0.8 for c in coverages.values()) and agree > 0.5
    _line(
        "7e",
        ok,
        f"holdout n={len(hold_rows)}, coverage LEEP {coverages['LEEP']:.3f} "
        f"LogME {coverages['LOGME']:.3f} (>= 0.8), agreement {agree:.3f} (> 0.5)",
    )


# ----------------------------------------------- 8: determinism and persistence


def test_criterion_8_determinism_and_persistence(desk_snr, tmp_path):
    cfg, _, first_dir = desk_snr
    rerun_dir = tmp_path / "rerun"
    rerun = run_sweep(cfg, rerun_dir)
    sweep_ok = rerun["ok"] and (
        (rerun_dir / "records.csv").read_bytes() == (first_dir / "records.csv").read_bytes()
    )

    small = generate_master(
        MasterSpec(classes=("BPSK", "GFSK5k", "AWGN"), per_class=20, frame_len=64, seed=77)
    )
    back = read_sigmf(write_sigmf(small, tmp_path / "sigmf"))
    sigmf_ok = (
        np.array_equal(back.frames, small.frames)
        and np.array_equal(back.labels, small.labels)
        and back.class_names == small.class_names
        and back.metas == small.metas
    )

    net = Network.build(cnn_specs(6), seed=6)
    ckpt = from_network(net, class_names=list("abcdef"), provenance={"seed": 6})
    loaded = load_checkpoint(save_checkpoint(ckpt, tmp_path / "model.npz"))
    ckpt_ok = (
        all(
            np.array_equal(a, b)
            for la, lb in zip(ckpt.weights, loaded.weights)
            for a, b in zip(la, lb)
        )
        and loaded.specs == ckpt.specs
        and loaded.class_names == ckpt.class_names
        and loaded.provenance == ckpt.provenance
    )
    x = np.random.default_rng(4).standard_normal((4, 2, 128)).astype(np.float32)
    ckpt_ok = ckpt_ok and np.array_equal(
        net.forward(x)[0], build_network(loaded).forward(x)[0]
    )

    _line(
        8,
        sweep_ok and sigmf_ok and ckpt_ok,
        f"sweep rerun byte-identical {sweep_ok}, sigmf roundtrip lossless {sigmf_ok}, "
        f"checkpoint roundtrip lossless {ckpt_ok}",
    )
