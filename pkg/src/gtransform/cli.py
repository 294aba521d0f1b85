"""Command line front end.

Exit codes: 0 success, 1 a check failed, 2 usage, format or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import numpy as np
from scipy.stats import unitary_group

from . import core, kernels, nlp, qgt, train, vision
from .errors import ConfigError, FormatError, GTError
from .tensorio import atomic_write, read_tensor, write_tensor

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- argument types ------------------------------------------------------------

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _seed(s):
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {s}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def _probability(s):
    v = float(s)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {s}")
    return v


def _momentum(s):
    v = float(s)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError(f"momentum must lie in [0, 1), got {s}")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {s}")
    return v


def _float_list(s):
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s}") from None


def _kind(s):
    try:
        return kernels.TransformKind.parse(s)
    except GTError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"usage: {message}\n")


# -- output helpers ------------------------------------------------------------

def _emit_text(text: str, out):
    if out:
        atomic_write(out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _maybe_real(a):
    a = np.asarray(a)
    return a.real.copy() if np.iscomplexobj(a) and not np.any(a.imag) else a


def _num_threads() -> int:
    raw = os.environ.get("GT_NUM_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise ConfigError(f"GT_NUM_THREADS must be an integer, got {raw!r}") from None


def _load_gt(args, default: core.GTParams) -> core.GTParams:
    if getattr(args, "params", None):
        blocks = core.load_params_file(args.params)
        name = args.section or next(iter(blocks), None)
        if name not in blocks:
            raise ConfigError(f"parameter section {name!r} not found in {args.params}")
        return blocks[name]
    transforms = args.transforms.split(",") if getattr(args, "transforms", None) else default.transforms
    weights = args.weights if getattr(args, "weights", None) is not None else default.weights
    mixer = args.mixer if getattr(args, "mixer", None) is not None else default.mixer
    return core.GTParams(tuple(transforms), tuple(weights), mixer)


# -- subcommands ---------------------------------------------------------------

def cmd_kernel(args):
    k = kernels.build_kernel(args.kind, args.n, orthonormal=args.orthonormal)
    out = args.out or f"{k.kind.value}_{k.size}.gttf"
    write_tensor(out, _maybe_real(k.entries))
    print(f"wrote {k.kind.value} kernel {k.size}x{k.size} to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_apply(args):
    x = read_tensor(args.input)
    n = x.shape[-1]
    k = kernels.build_kernel(args.kind, n, orthonormal=args.orthonormal)
    y = x @ k.entries.T
    write_tensor(args.out or "applied.gttf", _maybe_real(y))
    return EXIT_OK


def cmd_blend(args):
    gt = _load_gt(args, core.make_vision_params())
    if args.input:
        x = read_tensor(args.input)
        if np.iscomplexobj(x):
            raise FormatError("general transform input must be real")
        out = core.gt_forward_2d(gt, x)[0] if args.two_d else core.gt_forward_1d(gt, x)[0]
        write_tensor(args.out or "blended.gttf", out)
    else:
        if args.n is None:
            raise UsageError("blend needs --n or --input")
        b = core.blend_kernel(gt, args.n)
        write_tensor(args.out or "blended.gttf", _maybe_real(b.entries))
    return EXIT_OK


def _rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


def _gradcheck_gt(args, rng):
    rows = []
    for trial in range(args.trials):
        if args.pipeline == "vision":
            base = core.make_vision_params(rng.normal(0, 1, 2), rng.normal(0.5, 0.5))
            n = args.n
            if n & (n - 1):
                raise ConfigError("vision gradcheck needs a power-of-two --n")
        else:
            base = core.make_nlp_params(rng.normal(0, 1, 2), rng.normal(0.5, 0.5))
            n = args.n
        two_d = bool(trial % 2)
        shape = (n, n) if two_d else (n,)
        x = rng.normal(size=shape)
        g = rng.normal(size=shape)
        fwd = core.gt_forward_2d if two_d else core.gt_forward_1d
        ndim = 2 if two_d else 1
        _, y = fwd(base, x)
        dp, dp3 = core.gt_grad_params(base, x, g, y, ndim=ndim)
        analytic = np.append(dp, dp3)
        v = base.as_vector()
        h = 1e-6
        for j in range(len(v)):
            e = np.zeros_like(v)
            e[j] = h
            fp = np.sum(g * fwd(base.with_vector(v + e), x)[0])
            fm = np.sum(g * fwd(base.with_vector(v - e), x)[0])
            num = (fp - fm) / (2 * h)
            name = f"p{j + 1}" if j < len(v) - 1 else "p3"
            rows.append((trial, name, analytic[j], num, _rel_err(analytic[j], num)))
        gx = core.gt_grad_input(base, g, ndim=ndim)
        d = rng.normal(size=shape)
        fp = np.sum(g * fwd(base, x + h * d)[0])
        fm = np.sum(g * fwd(base, x - h * d)[0])
        num = (fp - fm) / (2 * h)
        an = float(np.sum(gx * d))
        rows.append((trial, "input", an, num, _rel_err(an, num)))
    return rows


def _gradcheck_nlp(args, rng):
    rows = []
    for trial in range(args.trials):
        gt = core.make_nlp_params(rng.normal(0, 0.5, 2), rng.normal(0.5, 0.3))
        cfg = nlp.EncoderConfig(vocab_size=12, seq_len=args.n, hidden_dim=args.n, ffn_dim=2 * args.n,
                                num_layers=1, gt=gt, init_std=0.5)
        model = nlp.Encoder(cfg, seed=int(rng.integers(2**31)))
        tokens = rng.integers(0, cfg.vocab_size, (3, cfg.seq_len))
        labels = rng.integers(0, 2, 3)

        def loss():
            return train.cross_entropy(model.forward(tokens)[0], labels)[0]

        logits, cache = model.forward(tokens)
        _, dl = train.cross_entropy(logits, labels)
        grads = model.backward(dl, cache)
        h = 1e-6
        for name in model.gt_names() + ["ffn_probe", "emb_probe"]:
            if name == "ffn_probe":
                name, idx = "layer0.ffn.w1", (0, 0)
            elif name == "emb_probe":
                name, idx = "tok_emb", (int(tokens[0, 1]), 0)
            else:
                for j in range(model.params[name].shape[0]):
                    rows.append(_fd_row(trial, f"{name}[{j}]", model, name, (j,), grads, loss, h))
                continue
            rows.append(_fd_row(trial, f"{name}{list(idx)}", model, name, idx, grads, loss, h))
    return rows


def _fd_row(trial, label, model, name, idx, grads, loss, h):
    arr = model.params[name]
    old = arr[idx]
    arr[idx] = old + h
    fp = loss()
    arr[idx] = old - h
    fm = loss()
    arr[idx] = old
    num = (fp - fm) / (2 * h)
    an = float(grads[name][idx])
    return (trial, label, an, num, _rel_err(an, num))


def cmd_gradcheck(args):
    rng = np.random.default_rng(args.seed)
    tol = args.tol if args.tol is not None else (1e-6 if args.pipeline != "nlp-encoder" else 1e-4)
    if args.pipeline == "nlp-encoder":
        rows = _gradcheck_nlp(args, rng)
    else:
        rows = _gradcheck_gt(args, rng)
    _emit_text(_csv(rows, ["trial", "quantity", "analytic", "numeric", "rel_err"]), args.out)
    worst = max(r[-1] for r in rows)
    print(f"gradcheck {args.pipeline}: {len(rows)} checks, worst relative error {worst:.3e} (tol {tol:g})",
          file=sys.stderr)
    return EXIT_OK if worst < tol else EXIT_CHECK


def _read_image(path):
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:2] == b"P6":
        return vision.read_ppm(path)
    img = read_tensor(path)
    if img.ndim != 3 or img.shape[2] != 3 or np.iscomplexobj(img):
        raise FormatError(f"{path}: expected a real HxWx3 tensor")
    return img


def cmd_features(args):
    if args.params:
        blocks = core.load_params_file(args.params)
        gts = vision.PerChannelGT.from_blocks(blocks, args.prefix or "")
    else:
        gts = vision.PerChannelGT.uniform(_load_gt(args, core.make_vision_params()))
    images = [_read_image(p) for p in args.input]
    feats = vision.extract_many(images, gts, k=args.k, order=args.order, crop=not args.no_crop,
                                workers=_num_threads())
    if args.normalize:
        stats = vision.fit_channel_stats(feats)
        feats = [vision.normalize(f, stats) for f in feats]
    out = feats[0] if len(feats) == 1 else np.stack(feats)
    write_tensor(args.out or "features.gttf", out)
    print(f"features shape {out.shape}", file=sys.stderr)
    return EXIT_OK


def _toy_config(args):
    if args.optimizer == "adamw":
        opt = train.AdamW(weight_decay=args.weight_decay)
    else:
        opt = train.SGD(momentum=args.momentum, weight_decay=args.weight_decay)
    return train.TrainConfig(optimizer=opt, schedule=train.StepDecay(args.lr, 1.0, max(args.epochs, 1)),
                             batch_size=args.batch_size, epochs=args.epochs, seed=args.seed,
                             gt_lr_mult=args.gt_lr_mult, decay_gt=args.decay_gt)


def cmd_train_toy(args):
    cfg = _toy_config(args)
    task = train.make_basis_task(args.target, n=args.n, n_train=args.n_train, n_val=args.n_val,
                                 probe=args.probe, noise=args.noise, flip=args.flip, seed=args.seed)
    if args.oracle:
        hist = train.run_basis_oracle(config=cfg, task=task)
    else:
        hist = train.run_basis_recovery_experiment(config=cfg, task=task)
    _emit_text(hist.to_csv(), args.out)
    last = hist.records[-1]
    print(f"final val top-1 {last.val_top1:.2f}%, best epoch {train.select_best_epoch(hist)}", file=sys.stderr)
    return EXIT_OK


def lcu_residuals(config, psi):
    """Infidelity and probability residual of the LCU circuit vs the direct sum."""
    out, prob = qgt.lcu_apply(config, psi)
    direct = qgt.qgt_matrix(config) @ psi.amplitudes
    dprob = float(np.vdot(direct, direct).real)
    ref = qgt.QState(direct / np.sqrt(dprob))
    return 1.0 - qgt.fidelity(out, ref), abs(prob - dprob), prob


def cmd_qgt(args):
    rng = np.random.default_rng(args.seed)
    rows = []
    if args.check_lcu:
        exps = [args.experiment] if args.experiment else list(qgt.EXPERIMENTS)
        for case, e in enumerate(exps):
            cfg = qgt.build_experiment_config(e, num_qubits=args.qubits)
            if args.random_weights:
                cfg = cfg.with_logits(rng.normal(size=len(cfg.matrices)))
            x = rng.normal(size=2**args.qubits)
            infid, dp, prob = lcu_residuals(cfg, qgt.amplitude_encode(x)[0])
            rows.append((case, e, args.qubits, len(cfg.matrices), infid, dp, prob))
        for j in range(args.random_cases):
            n = int(rng.integers(1, 4))
            m = int(rng.integers(1, 5))
            mats = [unitary_group.rvs(2**n, random_state=rng) for _ in range(m)]
            cfg = qgt.LCUConfig.from_matrices(mats, rng.uniform(0.05, 1.0, m))
            x = rng.normal(size=2**n)
            infid, dp, prob = lcu_residuals(cfg, qgt.amplitude_encode(x)[0])
            rows.append((len(rows), "random", n, m, infid, dp, prob))
        _emit_text(_csv(rows, ["case", "experiment", "qubits", "unitaries", "infidelity", "prob_residual",
                               "success_prob"]), args.out)
        worst = max(max(abs(r[4]), r[5]) for r in rows)
        print(f"LCU equivalence: {len(rows)} cases, worst residual {worst:.3e}", file=sys.stderr)
        return EXIT_OK if worst < args.tol else EXIT_CHECK
    if args.train_steps:
        cfg = qgt.build_experiment_config(args.experiment or "S4", num_qubits=3)
        task = train.make_basis_task(args.target, seed=args.seed)
        res = qgt.train_qgt_weights(cfg, task.x_train, task.y_train, steps=args.train_steps, lr=args.lr)
        w = [cfg.weights] + res.weights
        rows = [(t, res.losses[t], *map(float, w[t])) for t in range(len(res.losses))]
        _emit_text(_csv(rows, ["step", "loss"] + [f"w{i}" for i in range(len(cfg.matrices))]), args.out)
        return EXIT_OK if res.losses[-1] < res.losses[0] else EXIT_CHECK
    # default: one feature map per experiment on a random input
    exps = [args.experiment] if args.experiment else list(qgt.EXPERIMENTS)
    x = rng.normal(size=8)
    for e in exps:
        cfg = qgt.build_experiment_config(e)
        feats, prob = qgt.qgt_feature_map(x, cfg)
        rows.append((e, prob, *feats))
    _emit_text(_csv(rows, ["experiment", "success_prob"] + [f"f{i}" for i in range(8)]), args.out)
    return EXIT_OK


def cmd_train_text(args):
    labels, texts = nlp.load_text_dataset(args.data)
    if len(labels) == 0:
        raise FormatError(f"{args.data}: no examples")
    tok = nlp.ByteTokenizer(args.seq_len)
    tokens = tok.encode_batch(texts)
    num_classes = int(labels.max()) + 1
    cfg = nlp.EncoderConfig(vocab_size=tok.vocab_size, seq_len=args.seq_len, hidden_dim=args.hidden_dim,
                            ffn_dim=args.ffn_dim, num_layers=args.layers, num_classes=max(num_classes, 2),
                            share_gt=args.share_gt)
    model = nlp.Encoder(cfg, seed=args.seed)
    tcfg = train.TrainConfig(optimizer=train.AdamW(weight_decay=args.weight_decay),
                             schedule=train.WarmupLinearDecay(args.lr, args.warmup, args.epochs),
                             batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)
    hist = train_text_classifier(model, tokens, labels, tcfg, val_fraction=args.val_fraction)
    _emit_text(hist.to_csv(), args.out)
    if args.save:
        model.save(args.save)
    return EXIT_OK


def train_text_classifier(model, tokens, labels, config, val_fraction=0.2):
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(labels))
    n_val = int(round(len(labels) * val_fraction))
    val, tr = order[:n_val], order[n_val:]
    if len(tr) == 0:
        raise ConfigError("no training examples left after the validation split")
    if len(val) == 0:
        val = tr

    def loss_grad(p, idx):
        model.params = p
        logits, cache = model.forward(tokens[tr[idx]])
        loss, dl = train.cross_entropy(logits, labels[tr[idx]])
        return loss, model.backward(dl, cache)

    def evaluate(p):
        model.params = p
        lt = model.forward(tokens[tr])[0]
        lv = model.forward(tokens[val])[0]
        return (train.cross_entropy(lt, labels[tr])[0], train.top1_accuracy(lt, labels[tr]),
                train.cross_entropy(lv, labels[val])[0], train.top1_accuracy(lv, labels[val]))

    params, hist = train.train_loop(model.params, loss_grad, evaluate, len(tr), config, gt_names=model.gt_names())
    model.params = params
    return hist


# -- parser --------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--out", default=None, help="output path (default: stdout for CSV)")
    common.add_argument("--config", default=None, help="file of key=value lines; flags override")

    p = _Parser(prog="gt", description="General transform toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("kernel", parents=[common], help="export a component kernel")
    k.add_argument("--kind", type=_kind, required=True)
    k.add_argument("--n", type=_positive_int, required=True)
    k.add_argument("--orthonormal", action="store_true", help="orthonormal DCT-II")
    k.set_defaults(func=cmd_kernel)

    a = sub.add_parser("apply", parents=[common], help="apply a kernel along the last axis of a tensor")
    a.add_argument("--kind", type=_kind, required=True)
    a.add_argument("--input", required=True)
    a.add_argument("--orthonormal", action="store_true")
    a.set_defaults(func=cmd_apply)

    gt_args = argparse.ArgumentParser(add_help=False)
    gt_args.add_argument("--transforms", default=None, help="comma-separated kinds, residual last")
    gt_args.add_argument("--weights", type=_float_list, default=None)
    gt_args.add_argument("--mixer", type=float, default=None)
    gt_args.add_argument("--params", default=None, help="parameter file (INI blocks)")
    gt_args.add_argument("--section", default=None)

    b = sub.add_parser("blend", parents=[common, gt_args], help="blended kernel or general transform forward")
    b.add_argument("--n", type=_positive_int, default=None)
    b.add_argument("--input", default=None)
    b.add_argument("--two-d", action="store_true")
    b.set_defaults(func=cmd_blend)

    g = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient checks")
    g.add_argument("--pipeline", choices=["vision", "nlp", "nlp-encoder"], default="vision")
    g.add_argument("--n", type=_positive_int, default=8)
    g.add_argument("--trials", type=_positive_int, default=100)
    g.add_argument("--tol", type=_positive_float, default=None)
    g.set_defaults(func=cmd_gradcheck)

    f = sub.add_parser("features", parents=[common, gt_args], help="block frequency features of images")
    f.add_argument("--input", nargs="+", required=True, help="P6 PPM or HxWx3 tensor files")
    f.add_argument("--k", type=_positive_int, default=64)
    f.add_argument("--order", choices=["zigzag", "raster"], default="zigzag")
    f.add_argument("--prefix", default=None, help="parameter block prefix, e.g. gtnet24")
    f.add_argument("--no-crop", action="store_true")
    f.add_argument("--normalize", action="store_true")
    f.set_defaults(func=cmd_features)

    t = sub.add_parser("train-toy", parents=[common], help="basis-recovery experiment")
    t.add_argument("--target", type=_kind, default=kernels.TransformKind.DCT2)
    t.add_argument("--epochs", type=_positive_int, default=60)
    t.add_argument("--lr", type=_positive_float, default=0.2)
    t.add_argument("--optimizer", choices=["sgd", "adamw"], default="sgd")
    t.add_argument("--momentum", type=_momentum, default=0.5)
    t.add_argument("--weight-decay", type=_nonneg_float, default=0.0)
    t.add_argument("--batch-size", type=_positive_int, default=2000)
    t.add_argument("--n", type=_positive_int, default=8)
    t.add_argument("--n-train", type=_positive_int, default=2000)
    t.add_argument("--n-val", type=_positive_int, default=500)
    t.add_argument("--probe", type=int, default=1)
    t.add_argument("--noise", type=_nonneg_float, default=1.0)
    t.add_argument("--flip", type=_probability, default=0.05)
    t.add_argument("--gt-lr-mult", type=_positive_float, default=1.0)
    t.add_argument("--decay-gt", action="store_true")
    t.add_argument("--oracle", action="store_true", help="train the head on exact target features")
    t.set_defaults(func=cmd_train_toy, seed=7)

    q = sub.add_parser("qgt", parents=[common], help="quantum general transform simulation")
    q.add_argument("--experiment", default=None, help="S1..S4 (default: all)")
    q.add_argument("--check-lcu", action="store_true")
    q.add_argument("--random-cases", type=int, default=0)
    q.add_argument("--random-weights", action="store_true")
    q.add_argument("--qubits", type=_positive_int, default=3)
    q.add_argument("--tol", type=_positive_float, default=1e-10)
    q.add_argument("--train-steps", type=int, default=0)
    q.add_argument("--target", type=_kind, default=kernels.TransformKind.DCT2)
    q.add_argument("--lr", type=_positive_float, default=0.5)
    q.set_defaults(func=cmd_qgt)

    x = sub.add_parser("train-text", parents=[common], help="train the toy text encoder")
    x.add_argument("--data", required=True, help="label<TAB>text lines")
    x.add_argument("--seq-len", type=_positive_int, default=32)
    x.add_argument("--hidden-dim", type=_positive_int, default=16)
    x.add_argument("--ffn-dim", type=_positive_int, default=32)
    x.add_argument("--layers", type=_positive_int, default=2)
    x.add_argument("--share-gt", action="store_true")
    x.add_argument("--epochs", type=_positive_int, default=20)
    x.add_argument("--warmup", type=_nonneg_float, default=2.0)
    x.add_argument("--lr", type=_positive_float, default=1e-3)
    x.add_argument("--weight-decay", type=_nonneg_float, default=0.01)
    x.add_argument("--batch-size", type=_positive_int, default=16)
    x.add_argument("--val-fraction", type=_probability, default=0.2)
    x.add_argument("--save", default=None, help="checkpoint path")
    x.set_defaults(func=cmd_train_text)
    return p


def _read_config(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(parser, argv):
    """Install config-file values as subcommand defaults so flags override them."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = _read_config(known.config)
    command = next((a for a in argv if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if command not in subparsers.choices:
        return
    sp = subparsers.choices[command]
    actions = {a.dest: a for a in sp._actions}
    for key, value in values.items():
        if key in ("config", "command", "func") or key not in actions:
            raise ConfigError(f"unknown config key {key!r} for {command}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ConfigError(f"config key {key!r} expects a boolean")
            sp.set_defaults(**{key: value.lower() in ("1", "true", "yes")})
        else:
            action.required = False
            sp.set_defaults(**{key: value})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except GTError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
