"""Command-line entry point: ``selfsup <command> ...``.

Every command is deterministic given ``--seed`` and writes into ``--out``.
If a command fails, files it had already written are removed.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import calibrate as cal
from . import counts as cm
from . import noise as nz
from . import theory
from .denoise import MedianRadius, NlmCutoff, WaveletThreshold
from .grid import partition_grid, partition_random, partition_singletons
from .jinv import InterpolateNeighbors, JInvariantDenoiser, RandomUniform, verify_j_invariance
from .kernels import BACKEND
from .pgm import read_image, write_image
from .scenes import synthetic_scene

log = logging.getLogger("selfsup")


class CliError(Exception):
    pass


class Outputs:
    """Tracks files written by a command so a failure can clean them up."""

    def __init__(self, root):
        self.root = root
        self.written = []

    def path(self, name):
        os.makedirs(self.root, exist_ok=True)
        p = os.path.join(self.root, name)
        self.written.append(p)
        return p

    def image(self, name, img):
        p = self.path(name)
        clipped = write_image(p, img)
        if clipped:
            log.warning("%s: %d pixels clipped to [0, 1]", p, clipped)
        return clipped

    def text(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text)

    def discard(self):
        for p in self.written:
            if os.path.exists(p):
                os.remove(p)


@contextmanager
def outputs(root):
    out = Outputs(root)
    try:
        yield out
    except BaseException:
        out.discard()
        raise


def kv(**items) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in items.items())


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def parse_grid(text: str, integer: bool) -> list:
    """``"1,2,3"``, inclusive integer range ``"1:6"`` or linspace ``"0.02:0.3:8"``."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) == 2 and integer:
            a, b = int(parts[0]), int(parts[1])
            return list(range(a, b + 1))
        if len(parts) == 3:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            vals = np.linspace(a, b, n)
            return [int(round(v)) for v in vals] if integer else [float(v) for v in vals]
        raise CliError(f"bad range {text!r}")
    vals = [t for t in text.split(",") if t.strip()]
    if not vals:
        raise CliError("empty parameter grid")
    return [int(v) for v in vals] if integer else [float(v) for v in vals]


def _load(path):
    try:
        return read_image(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


# -- denoiser / partition options -------------------------------------------

def add_denoiser_args(p, multi: bool):
    p.add_argument("--denoiser", choices=["donut", "median", "wavelet", "nlm"], default="donut",
                   help="donut: median without centre pixel; median: plain disk median")
    if multi:
        p.add_argument("--params", required=True,
                       help="grid of radius / threshold / h: '1,2,3', '1:6' or '0.02:0.3:8'")
    else:
        p.add_argument("--param", type=float, required=True)
    p.add_argument("--levels", type=int, default=3, help="wavelet levels")
    p.add_argument("--patch", type=int, default=5, help="NL-means patch size")
    p.add_argument("--window", type=int, default=11, help="NL-means search window")
    p.add_argument("--partition", choices=["auto", "none", "singletons", "grid", "random"], default="auto",
                   help="auto: none for median filters, 4x4 grid otherwise")
    p.add_argument("--grid", type=int, default=4, help="grid period for --partition grid")
    p.add_argument("--subsets", type=int, default=25, help="subset count for --partition random")
    p.add_argument("--replacement", choices=["interp", "uniform"], default="interp")


def make_param(args, value):
    if args.denoiser in ("donut", "median"):
        if value != int(value):
            raise CliError("median radius must be an integer")
        return MedianRadius(int(value), include_center=args.denoiser == "median")
    if args.denoiser == "wavelet":
        return WaveletThreshold(float(value), args.levels)
    return NlmCutoff(float(value), args.patch, args.window)


def make_partition(args, shape):
    H, W = shape
    kind = args.partition
    if kind == "auto":
        kind = "none" if args.denoiser in ("donut", "median") else "grid"
    if kind == "none":
        return None
    if kind == "singletons":
        return partition_singletons(H * W)
    if kind == "grid":
        if args.grid > min(H, W):
            raise CliError(f"grid {args.grid} does not fit a {W}x{H} image")
        return partition_grid(W, H, args.grid, args.grid)
    if args.subsets > H * W:
        raise CliError("more subsets than pixels")
    return partition_random(H * W, args.subsets, args.seed)


def make_replacement(args):
    if args.replacement == "uniform":
        return RandomUniform(0.0, 1.0, args.seed)
    return InterpolateNeighbors()


# -- commands -----------------------------------------------------------------

def cmd_scene(args):
    img = synthetic_scene(args.size, args.seed)
    with outputs(args.out) as out:
        out.image(args.name, img)
    print(kv(path=os.path.join(args.out, args.name), size=args.size), end="")


def _noise_spec(args) -> nz.Composite:
    steps, clip = [], None
    if args.preset:
        steps.extend(nz.PRESETS[args.preset].steps)
    if args.noise_file:
        with open(args.noise_file) as fh:
            base = nz.parse_spec(fh.read())
        steps.extend(base.steps)
        clip = base.clip
    steps.extend(nz.parse_step(s) for s in args.noise or [])
    if args.clip:
        lo, hi = _floats(args.clip)
        clip = (lo, hi)
    if not steps:
        raise CliError("no noise given; use --noise, --noise-file or --preset")
    return nz.Composite(tuple(steps), clip)


def cmd_simulate(args):
    y = _load(args.input)
    spec = _noise_spec(args)
    x = nz.apply_noise(y, spec, args.seed)
    try:
        var = nz.noise_variance(spec, y)
    except nz.UnsupportedSpec:
        var = None
    with outputs(args.out) as out:
        clipped = out.image(args.name + ".pgm", x)
        meta = {"input": args.input, "seed": args.seed, "shape": f"{y.shape[1]}x{y.shape[0]}",
                "noise_variance": "undefined" if var is None else var, "clipped_pixels": clipped}
        out.text(args.name + ".meta.txt", kv(**meta) + "# noise spec\n" + nz.format_spec(spec))
    print(kv(noise_variance="undefined" if var is None else var, clipped_pixels=clipped), end="")


def cmd_calibrate(args):
    x = _load(args.noisy)
    clean = _load(args.clean) if args.clean else None
    if clean is not None and clean.shape != x.shape:
        raise CliError("clean image has a different shape")
    integer = args.denoiser in ("donut", "median")
    params = [make_param(args, v) for v in parse_grid(args.params, integer)]
    partition = make_partition(args, x.shape)
    replacement = make_replacement(args)
    log.info("calibrating %d %s settings (partition=%s, backend=%s)", len(params), args.denoiser,
             "none" if partition is None else len(partition), BACKEND)
    curve = cal.sweep(params, x, partition, replacement, y=clean, workers=args.threads)
    best = cal.select_best(curve)
    ss = next(e.ss_loss for e in curve if e.param == best)
    f = JInvariantDenoiser(best, partition, replacement, args.threads) if partition is not None else best
    fx = f(x)
    gx = best(x)
    report = {"denoiser": args.denoiser, "param": str(best), "ss_loss": ss, "primary": args.primary}
    with outputs(args.out) as out:
        curve.to_csv(out.path("curve.csv"))
        out.image("denoised_f.pgm", fx)
        out.image("denoised_g.pgm", gx)
        out.image("denoised.pgm", fx if args.primary == "f" else gx)
        if clean is not None:
            report["psnr_f"] = cal.psnr(fx, clean)
            report["psnr_g"] = cal.psnr(gx, clean)
        if args.mix:
            if args.noise_var is None:
                raise CliError("--mix needs --noise-var")
            if args.noise_var > ss:
                raise CliError(f"--noise-var {args.noise_var} exceeds the self-supervised loss {ss}")
            mix = cal.optimal_mixing(fx, x, args.noise_var, ss)
            out.image("mixed.pgm", mix.mixed)
            report["lambda"] = mix.lam
            report["predicted_psnr_gain"] = mix.predicted_psnr_gain
            if clean is not None:
                report["psnr_mixed"] = cal.psnr(mix.mixed, clean)
        out.text("best.txt", kv(**report))
    print(kv(**report), end="")


def cmd_gp_demo(args):
    if not args.sigma > 0:
        raise CliError("--sigma must be > 0")
    if args.side > 33:
        raise CliError("--side above 33 is not supported")
    ells = _floats(args.lengthscales)
    rows = theory.gp_curve(args.side, ells, args.sigma)
    with outputs(args.out) as out:
        cm.write_curve_csv(out.path("gp_curve.csv"), rows, ("lengthscale", "jinv_mse", "full_mse"))
        for ell in ells:
            y, xs = theory.gp_sample(theory.TorusGP(args.side, ell, args.sigma), args.seed)
            np.save(out.path(f"gp_l{ell:g}_clean.npy"), y)
            np.save(out.path(f"gp_l{ell:g}_noisy.npy"), xs)
            # display copies: N(0, 1) field mapped by v -> (v + 3) / 6
            out.image(f"gp_l{ell:g}_clean.pgm", (y + 3) / 6)
            out.image(f"gp_l{ell:g}_noisy.pgm", (xs + 3) / 6)
    for ell, j, f in rows:
        print(kv(lengthscale=ell, jinv_mse=j, full_mse=f, gap=j - f).replace("\n", " ").strip())


def cmd_alphabet_demo(args):
    letters = theory.glyph_alphabet(args.letters, 16, args.alphabet_seed)
    rows = theory.alphabet_vs_gp_mse(letters, _floats(args.sigmas), args.seed, args.trials)
    with outputs(args.out) as out:
        cm.write_curve_csv(out.path("alphabet_curve.csv"),
                           [(r.sigma, r.alphabet_mse, r.gp_mse) for r in rows],
                           ("sigma", "alphabet_mse", "gp_mse"))
    for r in rows:
        print(kv(sigma=r.sigma, alphabet_mse=r.alphabet_mse, alphabet_se=r.alphabet_se,
                 gp_mse=r.gp_mse).replace("\n", " ").strip())


def _read_counts(path):
    try:
        return cm.read_counts_csv(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def _read_matrix(path):
    try:
        return cm.read_matrix_csv(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def cmd_counts(args):
    sub = args.counts_cmd
    with outputs(args.out) as out:
        if sub == "split":
            c = _read_counts(args.input)
            a, b = cm.split_counts(c, args.p, args.seed)
            cm.write_counts_csv(out.path("counts_1.csv"), a)
            cm.write_counts_csv(out.path("counts_2.csv"), b)
            print(kv(total=int(c.counts.sum()), total_1=int(a.counts.sum()), total_2=int(b.counts.sum())), end="")
        elif sub == "normalize":
            c = _read_counts(args.input)
            z = cm.normalize(c, cm.NormalizationSpec(args.n0, args.rho))
            cm.write_matrix_csv(out.path("normalized.csv"), z, c.cells, c.genes)
        elif sub == "rank-curve":
            ks = parse_grid(args.k, integer=True)
            if len(args.inputs) == 1:
                c = _read_counts(args.inputs[0])
                a, b = cm.split_counts(c, args.p, args.seed)
                n0 = args.n0 or float(np.median(c.counts.sum(axis=1))) * args.p
                x1 = cm.normalize(a, cm.NormalizationSpec(n0, args.rho))
                x2 = cm.normalize(b, cm.NormalizationSpec(n0, args.rho))
            elif len(args.inputs) == 2:
                x1, *_ = _read_matrix(args.inputs[0])
                x2, *_ = _read_matrix(args.inputs[1])
            else:
                raise CliError("rank-curve takes one count matrix or two normalised halves")
            curve = cm.self_supervised_rank_curve(x1, x2, ks)
            cm.write_curve_csv(out.path("rank_curve.csv"), curve)
            print(kv(best_k=cm.argmin_k(curve)), end="")
        elif sub == "bicv":
            x, *_ = _read_matrix(args.input)
            curve = cm.bicv(x, parse_grid(args.k, integer=True), args.folds, seed=args.seed)
            cm.write_curve_csv(out.path("bicv_curve.csv"), curve)
            print(kv(best_k=cm.argmin_k(curve)), end="")
        elif sub == "simulate":
            if args.kind == "poisson":
                c, _ = cm.simulate_low_rank_counts(args.rows, args.cols, args.rank, args.depth, args.seed)
                cm.write_counts_csv(out.path("counts.csv"), c)
            else:
                x, _ = cm.simulate_low_rank_gaussian(args.rows, args.cols, args.rank, seed=args.seed)
                cm.write_matrix_csv(out.path("matrix.csv"), x, [f"row{i}" for i in range(x.shape[0])],
                                    [f"col{j}" for j in range(x.shape[1])], index_name="row")


def cmd_metrics(args):
    a, b = _load(args.a), _load(args.b)
    if a.shape != b.shape:
        raise CliError(f"shape mismatch: {a.shape} vs {b.shape}")
    if args.rescale:
        a = cal.rescale_to_moments(a, b)
    print(kv(mse=cal.mse(a, b), psnr=cal.psnr(a, b)), end="")


def cmd_verify_jinv(args):
    x = _load(args.image)
    param = make_param(args, args.param)
    partition = make_partition(args, x.shape)
    if partition is None:
        f, partition = param, partition_singletons(x.size)
    else:
        f = JInvariantDenoiser(param, partition, make_replacement(args), args.threads)
    rep = verify_j_invariance(f, x, args.trials, args.seed, args.tol, partition)
    print(kv(max_deviation=rep.max_deviation, trials=rep.trials, passed=rep.passed), end="")
    return 0 if rep.passed else 1


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default .)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="selfsup", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("scene", parents=[common], help="write the built-in synthetic test scene")
    s.add_argument("--size", type=int, default=256)
    s.add_argument("--name", default="scene.pgm")
    s.set_defaults(func=cmd_scene)

    s = sub.add_parser("simulate", parents=[common], help="add synthetic noise to an image")
    s.add_argument("input")
    s.add_argument("--noise", action="append", help="noise step, e.g. 'gaussian sigma=0.1'; repeatable")
    s.add_argument("--noise-file", help="key=value noise configuration")
    s.add_argument("--preset", choices=sorted(nz.PRESETS), help="named noise model, applied before other steps")
    s.add_argument("--clip", help="lo,hi")
    s.add_argument("--name", default="noisy")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("calibrate", parents=[common], help="sweep a denoiser and pick the best setting")
    s.add_argument("noisy")
    add_denoiser_args(s, multi=True)
    s.add_argument("--clean", help="ground truth, adds gt_loss and psnr columns")
    s.add_argument("--mix", action="store_true", help="also write the optimal blend with the noisy input")
    s.add_argument("--noise-var", type=float)
    s.add_argument("--primary", choices=["f", "g"], default="f",
                   help="which output becomes denoised.pgm: masked f or raw g")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("gp-demo", parents=[common], help="Gaussian-process predictor errors vs length scale")
    s.add_argument("--side", type=int, default=9)
    s.add_argument("--lengthscales", default="1,2,4,8")
    s.add_argument("--sigma", type=float, default=0.5)
    s.set_defaults(func=cmd_gp_demo)

    s = sub.add_parser("alphabet-demo", parents=[common], help="alphabet denoiser vs matched Gaussian")
    s.add_argument("--sigmas", default="0.2,0.4,0.8,1.6")
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--letters", type=int, default=30)
    s.add_argument("--alphabet-seed", type=int, default=0)
    s.set_defaults(func=cmd_alphabet_demo)

    s = sub.add_parser("counts", parents=[common], help="count-matrix workflows")
    csub = s.add_subparsers(dest="counts_cmd", required=True)
    c = csub.add_parser("split", parents=[common])
    c.add_argument("input")
    c.add_argument("--p", type=float, default=0.5)
    c = csub.add_parser("normalize", parents=[common])
    c.add_argument("input")
    c.add_argument("--n0", type=float)
    c.add_argument("--rho", choices=["sqrt", "log1p"], default="sqrt")
    c = csub.add_parser("rank-curve", parents=[common])
    c.add_argument("inputs", nargs="+", help="one count CSV (split internally) or two normalised halves")
    c.add_argument("--k", default="1:30")
    c.add_argument("--p", type=float, default=0.5)
    c.add_argument("--n0", type=float)
    c.add_argument("--rho", choices=["sqrt", "log1p"], default="sqrt")
    c = csub.add_parser("bicv", parents=[common])
    c.add_argument("input")
    c.add_argument("--k", default="1:10")
    c.add_argument("--folds", type=int, default=2)
    c = csub.add_parser("simulate", parents=[common], help="write a low-rank fixture")
    c.add_argument("--kind", choices=["poisson", "gaussian"], default="poisson")
    c.add_argument("--rows", type=int, default=500)
    c.add_argument("--cols", type=int, default=200)
    c.add_argument("--rank", type=int, default=10)
    c.add_argument("--depth", type=float, default=2000.0)
    s.set_defaults(func=cmd_counts)

    s = sub.add_parser("metrics", parents=[common], help="mse and psnr of A against reference B")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--rescale", action="store_true", help="match A's mean and variance to B first")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("verify-jinv", parents=[common], help="empirical J-invariance check")
    s.add_argument("image")
    add_denoiser_args(s, multi=False)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--tol", type=float, default=0.0)
    s.set_defaults(func=cmd_verify_jinv)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        rc = args.func(args)
    except (CliError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
