"""Command-line entry point: ``gen-synthetic``, ``train``, ``synthesize``, ``eval``.

Exit codes: 0 success, 1 usage or validation error, 2 training stopped at
``max_outer_iter`` without converging.
"""

import argparse
import logging
import statistics
import sys
from pathlib import Path

from agingdict import kernels, model_store
from agingdict.config import ConfigError, RunConfig, format_config, load_config
from agingdict.dataset import load_dataset, read_sample, write_sample
from agingdict.dictionary_learning import format_log_csv, train
from agingdict.metrics import format_value, psnr, rmse
from agingdict.synthesis import SynthesisRequest, synthesize_sequence
from agingdict.synthetic import face_name, make_planted, write_planted

log = logging.getLogger("agingdict")

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2

SYNTH_DEFAULTS = dict(f=1024, G=5, k=20, m=40, n=30, sparsity=3, noise=0.01, seed=0, format="txt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--model", help="model file (.adlm)")
    p.add_argument("--out", help="output directory or file")
    p.add_argument("--seed", type=int)
    p.add_argument("--passes", type=int, help="synthesis sweeps (default 3)")
    p.add_argument("--sign", choices=("add", "subtract"), help="how the personalised layer enters the face")
    p.add_argument("--group", type=int, help="1-based age group of the input face")


def build_parser():
    parser = _Parser(prog="agingdict", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synthetic", help="write a planted dataset and its ground-truth model")
    _common(p)

    p = sub.add_parser("train", help="learn the aging dictionaries from a manifest")
    _common(p)
    p.add_argument("--manifest")

    p = sub.add_parser("synthesize", help="render the aging sequence of one face")
    _common(p)
    p.add_argument("input", help="input face (graymap or numeric text)")

    p = sub.add_parser("eval", help="RMSE/PSNR between synthesized and ground-truth faces")
    _common(p)
    p.add_argument("synth_dir")
    p.add_argument("truth_dir")
    return parser


def _config(args):
    cfg = load_config(args.config)
    return cfg.merged(model=args.model, out=args.out, seed=args.seed, passes=args.passes,
                      sign=args.sign, group=args.group,
                      manifest=getattr(args, "manifest", None))


def cmd_gen_synthetic(cfg):
    opts = {key: getattr(cfg, key) if getattr(cfg, key) is not None else default
            for key, default in SYNTH_DEFAULTS.items()}
    if cfg.out is None:
        raise UsageError("gen-synthetic needs --out")
    hyper = cfg.hyper()
    inst = make_planted(opts["f"], opts["G"], opts["k"], opts["m"], opts["n"], opts["sparsity"],
                        opts["noise"], opts["seed"], lam=hyper.lam, gamma=hyper.gamma)
    out = Path(cfg.out)
    manifest = write_planted(inst, out, ext=opts["format"])
    train_cfg = RunConfig(manifest=str(manifest.resolve()), k=opts["k"], m=opts["m"], seed=opts["seed"],
                          lam=hyper.lam, gamma=hyper.gamma)
    (out / "train.cfg").write_text(format_config(train_cfg))
    print(f"wrote {manifest} ({inst.bundle.dims.G} groups, {sum(inst.bundle.dims.n_per_bridge)} pairs)")
    return EXIT_OK


def cmd_train(cfg):
    if cfg.manifest is None or cfg.model is None:
        raise UsageError("train needs a manifest and --model")
    bundle = load_dataset(cfg.manifest)
    model = train(bundle, cfg.hyper())
    model_store.save(model, cfg.model)
    csv = format_log_csv(model.training_log, model.hyper)
    log_path = Path(cfg.out) / "training_log.csv" if cfg.out else Path(str(cfg.model) + ".log.csv")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log_path.write_text(csv)
    print(f"# initial_objective={model.initial_objective!r} backend={kernels.BACKEND}")
    sys.stdout.write(csv)
    status = "converged" if model.converged else "stopped at max_outer_iter"
    print(f"# {status} after {len(model.training_log)} iterations; model written to {cfg.model}")
    return EXIT_OK if model.converged else EXIT_NOT_CONVERGED


def cmd_synthesize(cfg, input_path):
    if cfg.model is None or cfg.out is None or cfg.group is None:
        raise UsageError("synthesize needs --model, --out and --group")
    model = model_store.load(cfg.model)
    x = read_sample(input_path)
    if x.shape != (model.dims.f,):
        raise UsageError(f"dimension mismatch: input has {x.size} values, model expects {model.dims.f}")
    if x.size and x.max() > 1.0:
        x = x / 255.0
    if not 1 <= cfg.group <= model.G - 1:
        raise UsageError(f"group must be in 1..{model.G - 1}")
    req = SynthesisRequest(x, cfg.group - 1, passes=cfg.passes or 3, sign_convention=cfg.sign or "add")
    seq = synthesize_sequence(model, req)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "pgm" if str(input_path).endswith(".pgm") else "txt"
    lines = [f"# start_group={cfg.group} passes={req.passes} sign={req.sign_convention}"]
    for t, steps in enumerate(seq.diagnostics, 1):
        for j, trace in enumerate(steps):
            target = cfg.group + j + 1
            lines.append(f"pass={t} target_group={target} " + " ".join(repr(v) for v in trace))
    for j, face in enumerate(seq.faces):
        write_sample(out / face_name(req.start_group + j + 1, ext), face)
    (out / "diagnostics.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(seq.faces)} faces to {out}")
    return EXIT_OK


def cmd_eval(cfg, synth_dir, truth_dir):
    def faces(d):
        d = Path(d)
        if not d.is_dir():
            raise UsageError(f"not a directory: {d}")
        return {p.name: p for p in sorted(d.iterdir()) if p.suffix in (".pgm", ".txt") and p.name != "diagnostics.txt"}

    synth, truth = faces(synth_dir), faces(truth_dir)
    if set(synth) != set(truth) or not synth:
        missing = sorted(set(synth) ^ set(truth))
        raise UsageError(f"unmatched files: {', '.join(missing) or '(none found)'}")
    rows = ["file,rmse,psnr"]
    errs, ps = [], []
    for name in sorted(synth):
        a, b = read_sample(synth[name]), read_sample(truth[name])
        e, q = rmse(a, b), psnr(a, b)
        errs.append(e)
        ps.append(q)
        rows.append(f"{name},{format_value(e)},{format_value(q)}")
    rows.append(f"mean,{format_value(statistics.fmean(errs))},{format_value(statistics.fmean(ps))}")
    rows.append(f"median,{format_value(statistics.median(errs))},{format_value(statistics.median(ps))}")
    text = "\n".join(rows) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = _config(args)
        if args.command == "gen-synthetic":
            return cmd_gen_synthetic(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "synthesize":
            return cmd_synthesize(cfg, args.input)
        return cmd_eval(cfg, args.synth_dir, args.truth_dir)
    except (UsageError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
