"""Command-line entry point: ``trackdiag generate|train|evaluate|classify|report``.

Every command resolves its parameters from flags and an optional
``--config`` file (flags win) and embeds the resolved parameters in each
artifact it writes. ``--config`` accepts a flat ``key = value`` file or any
artifact written by this tool, so a run can be repeated from its outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from trackdiag._version import __version__
from trackdiag.errors import ConvergenceError, InvalidArgumentError, ParseError

log = logging.getLogger("trackdiag")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_EPISODES = 3

SPLIT_FORMAT = "trackdiag-split/1"
# keys that never influence artifact content
NON_SEMANTIC = {"out", "cv_out", "split_out", "threads", "config", "command", "verbose", "func"}


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


# configuration -------------------------------------------------------------


def _parse_flat_config(text, path):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected 'key = value'", lineno, path)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _embedded_config(text):
    """Run config embedded in one of our artifacts, or None."""
    first, _, rest = text.partition("\n")
    candidates = []
    if first.startswith("trackdiag-model"):
        try:
            candidates.append(json.loads(rest)["training_meta"].get("run_config"))
        except (ValueError, KeyError, AttributeError):
            return None
    elif first.startswith("#"):
        body = first[1:].strip()
        for prefix in ("trackdiag-cv/1", SPLIT_FORMAT, "trackdiag-report/1", "trackdiag-diagnosis/1"):
            if body.startswith(prefix):
                body = body[len(prefix):].strip()
        try:
            doc = json.loads(body)
        except ValueError:
            return None
        candidates.append(doc.get("run_config") or doc.get("config"))
    elif first.startswith("meta.run_config,") or "\nmeta.run_config," in text:
        for line in text.splitlines():
            if line.startswith("meta.run_config,"):
                candidates.append(json.loads(line.partition(",")[2]))
    found = [c for c in candidates if isinstance(c, dict)]
    return found[0] if found else None


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc.strerror}")
    embedded = _embedded_config(text)
    if embedded is not None:
        return {k: v for k, v in embedded.items() if k not in NON_SEMANTIC}
    return _parse_flat_config(text, path)


def _coerce(value, action):
    if not isinstance(value, str):
        return value
    if isinstance(action, _TrackingTrue):
        return value.lower() in {"1", "true", "yes", "on"}
    if value.lower() in {"", "none"} and action.default is None:
        return None
    try:
        value = action.type(value) if action.type else value
    except ValueError:
        raise CliError(f"bad value {value!r} for {action.dest} in config file") from None
    if action.choices is not None and value not in action.choices:
        raise CliError(f"bad value {value!r} for {action.dest} in config file")
    return value


def resolve(args, actions):
    """Merge config-file values under explicitly given flags."""
    resolved = {dest: a.default for dest, a in actions.items()}
    resolved["command"] = args.command
    if getattr(args, "config", None):
        for key, value in load_config(args.config).items():
            if key not in actions:
                raise CliError(f"unknown key {key!r} in config file {args.config}")
            resolved[key] = _coerce(value, actions[key])
    explicit = getattr(args, "_explicit", set())
    for key, value in vars(args).items():
        if key in explicit:
            resolved[key] = value
    return argparse.Namespace(**resolved)


def run_config(ns):
    return {k: v for k, v in sorted(vars(ns).items()) if k not in NON_SEMANTIC and not k.startswith("_")}


def _mark(namespace, dest):
    namespace.__dict__.setdefault("_explicit", set()).add(dest)


class _Tracking(argparse.Action):
    """Store action that also records which flags were given explicitly."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        _mark(namespace, self.dest)


class _TrackingTrue(argparse.Action):
    def __init__(self, option_strings, dest, default=False, **kwargs):
        super().__init__(option_strings, dest, nargs=0, default=default, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, True)
        _mark(namespace, self.dest)


# helpers -------------------------------------------------------------------


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _require_file(path, what):
    if not path:
        raise CliError(f"missing --{what}")
    if not os.path.isfile(path):
        raise CliError(f"{what} file not found: {path}")
    return path


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    kwargs = {} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"}
    with open(path, mode, **kwargs) as fh:
        fh.write(data)


def _severity(ns):
    from trackdiag.generator import SeverityProfile

    return SeverityProfile(
        min_square_amplitude_v=ns.min_square_amplitude,
        traction_rise_range_v=tuple(_floats(ns.traction_rise_range)),
        traction_rise_duration_range_s=tuple(int(v) for v in _floats(ns.traction_rise_duration_range)),
        interrupted_drop_range_v=tuple(_floats(ns.interrupted_drop_range)),
        occupancy_duration_range_s=tuple(int(v) for v in _floats(ns.occupancy_duration_range)),
        bad_contact_duration_range_s=tuple(int(v) for v in _floats(ns.bad_contact_duration_range)),
    )


def _track_config(ns, base=None):
    from trackdiag.signal import TrackCircuitConfig

    return TrackCircuitConfig(
        base_voltage=ns.base_voltage if base is None else base,
        occupancy_threshold=ns.occupancy_threshold,
        nominal_noise_halfband=ns.noise_halfband,
    )


def _smo_settings(ns):
    from trackdiag.svm.smo import SmoSettings

    return SmoSettings(
        kkt_tolerance=ns.kkt_tolerance,
        max_iterations=ns.max_iterations or None,
        second_order=ns.second_order,
    )


def save_split(path, train_idx, test_idx, config):
    header = json.dumps({"run_config": config}, sort_keys=True, separators=(",", ":"))
    lines = [f"# {SPLIT_FORMAT} {header}"]
    lines.append("train," + ",".join(str(i) for i in train_idx.tolist()))
    lines.append("test," + ",".join(str(i) for i in test_idx.tolist()))
    _write(path, "\n".join(lines) + "\n")


def load_split(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(f"# {SPLIT_FORMAT}"):
        raise ParseError(f"missing '{SPLIT_FORMAT}' header", 1, path)
    parts = {}
    for lineno, line in enumerate(lines[1:], start=2):
        name, _, rest = line.partition(",")
        try:
            parts[name] = np.array([int(v) for v in rest.split(",") if v], dtype=np.int64)
        except ValueError:
            raise ParseError("bad index list", lineno, path) from None
    if "train" not in parts or "test" not in parts:
        raise ParseError("split file needs 'train' and 'test' rows", None, path)
    return parts["train"], parts["test"]


# commands ------------------------------------------------------------------


def cmd_generate(ns):
    from trackdiag.dataset import build_training_corpus, save_dataset

    if not ns.out:
        raise CliError("missing --out")
    ds = build_training_corpus(_track_config(ns), _severity(ns), ns.per_class, ns.seed)
    ds.meta["run_config"] = run_config(ns)
    save_dataset(ds, ns.out)
    counts = ", ".join(f"{c.slug}={n}" for c, n in ds.class_counts.items())
    print(f"wrote {len(ds)} windows to {ns.out} ({counts})")
    return EXIT_OK


def cmd_train(ns):
    from trackdiag.dataset import SplitSpec, load_dataset, split_indices
    from trackdiag.selection import HyperGrid, dumps_cv, grid_search
    from trackdiag.svm.io import save_model
    from trackdiag.svm.kernels import KernelSpec
    from trackdiag.svm.multiclass import train_one_vs_one

    path = _require_file(ns.dataset, "dataset")
    if not ns.out:
        raise CliError("missing --out")
    ds = load_dataset(path)
    ds.require_all_classes()
    train_idx, test_idx = split_indices(ds, SplitSpec(ns.train_fraction, ns.seed, True))
    train = ds.subset(train_idx)
    settings = _smo_settings(ns)
    config = run_config(ns)

    grid = HyperGrid(
        c_values=[ns.c] if ns.c is not None else _floats(ns.grid_c),
        gamma_values=[ns.gamma] if ns.gamma is not None else _floats(ns.grid_gamma),
        kernels=[ns.kernel] if ns.kernel is not None else ns.grid_kernels.split(","),
    )
    cv_path = ns.cv_out or ns.out + ".cv.csv"
    if ns.c is not None and ns.gamma is not None and ns.kernel is not None:
        best = (ns.c, ns.gamma, ns.kernel)
        log.info("fitting C=%g gamma=%g kernel=%s without search", *best)
    else:
        def progress(fold, combo, acc):
            log.info("fold %d C=%g gamma=%g %s: accuracy %.4f", fold, *combo, acc)

        result = grid_search(train, grid, ns.folds, settings, ns.seed, scaling=ns.scaling, progress=progress)
        best = result.best_combination
        _write(cv_path, dumps_cv(result, config))
        print(f"grid search over {len(grid)} combinations, {ns.folds} folds -> {cv_path}")
        print(f"best C={best[0]:g} gamma={best[1]:g} kernel={best[2]} mean CV accuracy {result.best_accuracy:.4f}")

    c, gamma, kernel = best
    model = train_one_vs_one(train, c, KernelSpec(kernel, gamma), settings, ns.seed, scaling=ns.scaling)
    model.training_meta["run_config"] = config
    model.training_meta["split"] = {"train": int(train_idx.size), "test": int(test_idx.size)}
    save_model(model, ns.out)
    split_path = ns.split_out or ns.out + ".split"
    save_split(split_path, train_idx, test_idx, config)
    n_sv = sum(len(m.dual_coefs) for m in model.binary_models)
    print(f"model C={c:g} gamma={gamma:g} kernel={kernel} ({n_sv} support vectors) -> {ns.out}")
    print(f"held-out split ({train_idx.size} train / {test_idx.size} test) -> {split_path}")
    return EXIT_OK


def cmd_evaluate(ns):
    from trackdiag.dataset import load_dataset
    from trackdiag.evaluation import compute_metrics, confusion_grid_data, render_report
    from trackdiag.svm.io import load_model
    from trackdiag.svm.multiclass import predict_classes

    model = load_model(_require_file(ns.model, "model"))
    ds = load_dataset(_require_file(ns.dataset, "dataset"), width=None)
    if ds.width != model.n_features:
        raise CliError(f"dataset windows have {ds.width} samples but the model expects {model.n_features}")
    train_idx, test_idx = load_split(_require_file(ns.split, "split"))
    if max(train_idx.max(initial=-1), test_idx.max(initial=-1)) >= len(ds):
        raise CliError("split indices exceed the dataset size")
    prefix = ns.out or os.path.splitext(ns.model)[0] + ".eval"
    config = run_config(ns)
    for name, idx in (("train", train_idx), ("test", test_idx)):
        if idx.size == 0:
            continue
        preds = predict_classes(model, ds.X[idx])
        report = compute_metrics(
            ds.labels[idx], preds,
            {"title": f"{name} split ({idx.size} windows)", "split": name, "run_config": config,
             "hyperparameters": {"c": model.c, **model.kernel.as_dict()}},
        )
        text = render_report(report, "text")
        _write(f"{prefix}.{name}.txt", text)
        _write(f"{prefix}.{name}.csv", render_report(report, "delimited"))
        _write(f"{prefix}.{name}.grid.csv", confusion_grid_data(report))
        sys.stdout.write(text.decode("utf-8") + "\n")
    return EXIT_OK


def cmd_classify(ns):
    from trackdiag.field import classify_trace, estimate_base_voltage, parse_field_csv, render_diagnosis_delimited, render_diagnosis_text
    from trackdiag.svm.io import load_model

    model = load_model(_require_file(ns.model, "model"))
    segments = parse_field_csv(_require_file(ns.input, "input"), circuit_id=ns.circuit_id)
    reports = []
    notes = []
    if len(segments) > 1:
        notes.append(f"input split into {len(segments)} segments at gaps longer than 5 s")
    for seg in segments:
        if len(seg) < 600:
            msg = f"segment starting at {seg.start_time} is only {len(seg)} s long; skipped"
            log.warning(msg)
            notes.append(msg)
            continue
        base = ns.base_voltage if ns.base_voltage else estimate_base_voltage(seg, ns.occupancy_threshold)
        rep = classify_trace(seg, model, _track_config(ns, base), stride=ns.stride, anchor=ns.anchor)
        rep.notes.append(f"base voltage {base:.3f} V")
        reports.append(rep)
    text = "".join(f"note: {n}\n" for n in notes) + render_diagnosis_text(reports)
    header = "# trackdiag-diagnosis/1 " + json.dumps({"run_config": run_config(ns)}, sort_keys=True, separators=(",", ":")) + "\n"
    prefix = ns.out or os.path.splitext(ns.input)[0] + ".diagnosis"
    _write(prefix + ".txt", header + text)
    _write(prefix + ".csv", header + render_diagnosis_delimited(reports))
    sys.stdout.write(text)
    n_episodes = sum(len(r.episodes) for r in reports)
    return EXIT_EPISODES if n_episodes else EXIT_OK


def cmd_report(ns):
    from trackdiag.evaluation import parse_delimited_report, render_report
    from trackdiag.selection import loads_cv

    path = _require_file(ns.input, "input")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith("# trackdiag-cv/1"):
        result = loads_cv(text, path)
        lines = [f"{'C':>8} {'gamma':>8} {'kernel':>6} {'mean_acc':>9}  folds"]
        for key in result.ranked():
            c, g, k = key
            folds = " ".join(f"{a:.4f}" for a in result.fold_accuracies.get(key, []))
            lines.append(f"{c:>8g} {g:>8g} {k:>6} {result.mean_accuracy[key]:>9.4f}  {folds}")
        c, g, k = result.best_combination
        lines.append(f"best: C={c:g} gamma={g:g} kernel={k} ({result.best_accuracy:.4f})")
        out = ("\n".join(lines) + "\n").encode("utf-8")
    elif text.startswith("total,"):
        out = render_report(parse_delimited_report(text), ns.format)
    elif text.startswith("# trackdiag-diagnosis/1"):
        out = text.partition("\n")[2].encode("utf-8")
    else:
        raise ParseError("unrecognised report file", 1, path)
    if ns.out:
        _write(ns.out, out)
    else:
        sys.stdout.write(out.decode("utf-8"))
    return EXIT_OK


# parser --------------------------------------------------------------------


def _add(p, *flags, **kwargs):
    if kwargs.get("action") == "store_true":
        kwargs["action"] = _TrackingTrue
    else:
        kwargs.setdefault("action", _Tracking)
    p.add_argument(*flags, **kwargs)


def _common(p):
    _add(p, "--seed", type=int, default=0, help="master random seed")
    _add(p, "--threads", type=int, default=None, help="worker thread cap (default: all cores)")
    _add(p, "--config", default=None, help="flat key=value file or a previous artifact")
    _add(p, "--out", default=None, help="output path (or prefix)")
    _add(p, "--verbose", "-v", action="store_true", help="log progress to stderr")


def _track_flags(p):
    _add(p, "--base-voltage", type=float, default=20.0)
    _add(p, "--occupancy-threshold", type=float, default=17.0)
    _add(p, "--noise-halfband", type=float, default=0.25)


def _smo_flags(p):
    _add(p, "--kkt-tolerance", type=float, default=1e-3)
    _add(p, "--max-iterations", type=int, default=0, help="0 means 10 x training size")
    _add(p, "--second-order", action="store_true", help="second-order working-set selection")
    _add(p, "--scaling", choices=["full_scale", "standardize", "none"], default="full_scale")


def build_parser():
    parser = argparse.ArgumentParser(prog="trackdiag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"trackdiag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a labelled training corpus")
    _common(g)
    _track_flags(g)
    _add(g, "--per-class", type=int, default=2800)
    _add(g, "--min-square-amplitude", type=float, default=1.0)
    _add(g, "--traction-rise-range", default="1.0,4.0")
    _add(g, "--traction-rise-duration-range", default="10,60")
    _add(g, "--interrupted-drop-range", default="2.0,6.0")
    _add(g, "--occupancy-duration-range", default="10,60")
    _add(g, "--bad-contact-duration-range", default="300,600")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="split, grid-search and fit the one-vs-one SVM")
    _common(t)
    _smo_flags(t)
    _add(t, "--dataset", default=None)
    _add(t, "--train-fraction", type=float, default=0.7)
    _add(t, "--folds", type=int, default=5)
    _add(t, "--c", type=float, default=None, help="fix C (skips search with --gamma and --kernel)")
    _add(t, "--gamma", type=float, default=None)
    _add(t, "--kernel", choices=["rbf", "poly"], default=None)
    _add(t, "--grid-c", default="0.1,1,10,100")
    _add(t, "--grid-gamma", default="0.0001,0.001,0.1,1")
    _add(t, "--grid-kernels", default="rbf,poly")
    _add(t, "--cv-out", default=None)
    _add(t, "--split-out", default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="confusion matrices for the train and test splits")
    _common(e)
    _add(e, "--model", default=None)
    _add(e, "--dataset", default=None)
    _add(e, "--split", default=None)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("classify", help="diagnose a field voltage log")
    _common(c)
    _add(c, "--model", default=None)
    _add(c, "--input", default=None)
    _add(c, "--circuit-id", default=None)
    _add(c, "--base-voltage", type=float, default=0.0, help="0 estimates it from the trace")
    _add(c, "--occupancy-threshold", type=float, default=17.0)
    _add(c, "--noise-halfband", type=float, default=0.25)
    _add(c, "--stride", type=int, default=600)
    _add(c, "--anchor", choices=["onset", "window"], default="onset")
    c.set_defaults(func=cmd_classify)

    r = sub.add_parser("report", help="re-render a saved report")
    _common(r)
    _add(r, "--input", default=None)
    _add(r, "--format", choices=["text", "delimited"], default="text")
    r.set_defaults(func=cmd_report)
    return parser, {"generate": g, "train": t, "evaluate": e, "classify": c, "report": r}


def main(argv=None):
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    sub = subparsers[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    try:
        resolved = resolve(args, actions)
        resolved.func = args.func
        logging.basicConfig(
            level=logging.INFO if resolved.verbose else logging.WARNING,
            format="%(levelname)s %(message)s",
        )
        if resolved.threads:
            from trackdiag.parallel import set_threads

            set_threads(resolved.threads)
        return resolved.func(resolved)
    except CliError as exc:
        print(f"trackdiag {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"trackdiag {args.command}: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidArgumentError, OSError) as exc:
        print(f"trackdiag {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"trackdiag {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
