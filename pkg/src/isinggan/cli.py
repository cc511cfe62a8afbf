"""Command-line entry point: ``isinggan <command> [--config FILE] [flags]``.

Exit status: 0 on success, 1 on invalid input or configuration, 2 when a
valid run fails (I/O errors, diverging training, ...).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import embed_stats, gan, harness, plotting, psd
from .conditioning import KINDS, make_strategy
from .config import ConfigError, boolean, float_list, int_list, load_flat_config
from .dataset import generate_dataset, temperature_grid
from .imageio import format_f32, image_to_lattice, load_manifest, read_pgm
from .ising import T_C, T_MIN, magnetization

log = logging.getLogger("isinggan")


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, seed=True):
    p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--plots", type=boolean, default=True, help="render PNG figures next to the CSVs")
    p.add_argument("-v", "--verbose", action="store_true")


def _temps(p: argparse.ArgumentParser, num=16):
    p.add_argument("--temps", type=float_list, help="comma-separated temperatures (overrides the grid)")
    p.add_argument("--num-temps", type=int, default=num, help="uniform grid size")
    p.add_argument("--t-min", type=float, default=T_MIN)
    p.add_argument("--t-max", type=float, default=float(np.float32(2 * T_C)))


def _resolve_temps(args) -> np.ndarray:
    if args.temps:
        return np.asarray(args.temps, dtype=np.float32)
    return temperature_grid(args.num_temps, args.t_min, args.t_max)


def build_parser():
    parser = _Parser(prog="isinggan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    leaves = {}

    p = sub.add_parser("simulate", help="simulate a labeled Ising image dataset")
    _common(p)
    _temps(p)
    p.add_argument("--out", type=Path, required=True, help="dataset directory")
    p.add_argument("--n", type=int, default=32, help="lattice side length")
    p.add_argument("--per-temp", type=int, default=64, help="images per temperature")
    p.add_argument("--max-steps", type=int, help="Metropolis steps per image (default n**3)")
    p.add_argument("--workers", type=int, default=1)
    leaves["simulate"] = p

    feat = sub.add_parser("features", help="PSD calibration and inversion")
    fsub = feat.add_subparsers(dest="features_command", required=True, parser_class=_Parser)
    p = fsub.add_parser("calibrate", help="build the temperature -> (slope, intercept) map")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="response map CSV")
    p.add_argument("--kmin", type=float)
    p.add_argument("--kmax", type=float)
    leaves["features calibrate"] = p
    p = fsub.add_parser("invert", help="estimate temperatures of images")
    _common(p)
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--images", type=Path, nargs="*", default=[], help="PGM files")
    p.add_argument("--dataset", type=Path, help="invert every image of a dataset")
    p.add_argument("--out", type=Path, help="CSV output (default stdout)")
    p.add_argument("--kmin", type=float)
    p.add_argument("--kmax", type=float)
    leaves["features invert"] = p

    p = sub.add_parser("train", help="train the conditional GAN")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="run directory")
    p.add_argument("--resume", type=Path, help="checkpoint to continue from")
    p.add_argument("--checkpoint-every", type=int, default=0, help="also save every N steps")
    defaults = gan.TrainConfig()
    p.add_argument("--strategy", choices=KINDS, default=defaults.strategy)
    p.add_argument("--steps", type=int, default=defaults.steps)
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--batch-size", type=int, default=defaults.batch_size)
    p.add_argument("--lr", type=float, default=defaults.lr)
    p.add_argument("--betas", type=float_list, default=list(defaults.betas))
    p.add_argument("--d-steps", type=int, default=defaults.d_steps)
    p.add_argument("--loss", choices=gan.LOSSES, default=defaults.loss)
    p.add_argument("--noise-dim", type=int, default=defaults.noise_dim)
    p.add_argument("--embedding-dim", type=int, default=defaults.embedding_dim)
    p.add_argument("--g-hidden", type=int, default=defaults.g_hidden)
    p.add_argument("--d-hidden", type=int, default=defaults.d_hidden)
    p.add_argument("--num-classes", type=int, default=defaults.num_classes)
    p.add_argument("--scalar-hidden", type=int, default=defaults.scalar_hidden)
    p.add_argument("--branch-widths", type=int_list, default=list(defaults.branch_widths))
    p.add_argument("--polarity", choices=("01", "pm1"), default=defaults.polarity)
    p.add_argument("--fake-labels", choices=("dataset", "uniform"), default=defaults.fake_labels)
    p.add_argument("--mismatch", type=boolean, default=defaults.mismatch)
    p.add_argument("--straight-through", type=boolean, default=defaults.straight_through)
    leaves["train"] = p

    p = sub.add_parser("evaluate", help="generate across temperatures and invert via the PSD map")
    _common(p)
    _temps(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--samples", type=int, default=100, help="samples per temperature")
    p.add_argument("--kmin", type=float)
    p.add_argument("--kmax", type=float)
    leaves["evaluate"] = p

    p = sub.add_parser("sensitivity", help="perturb the label around a base temperature")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--base-t", type=float, default=T_C)
    p.add_argument("--epsilons", type=float_list, default=list(harness.DEFAULT_EPSILONS))
    p.add_argument("--num-seeds", type=int, default=16, help="noise seeds seed .. seed+num_seeds-1")
    leaves["sensitivity"] = p

    p = sub.add_parser("embed-stats", help="per-neuron activity of an embedding")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help="trained model; omit to inspect a fresh embedder")
    p.add_argument("--network", choices=("G", "D"), default="G")
    p.add_argument("--strategy", choices=KINDS, default="binary-bits", help="fresh embedder kind")
    p.add_argument("--embedding-dim", type=int, default=64)
    p.add_argument("--num-classes", type=int, default=64)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tau", type=float, default=embed_stats.DEAD_TAU)
    p.add_argument("--max-neurons", type=int, help="neurons shown in the boxplot (default all)")
    p.add_argument("--out", type=Path, required=True)
    leaves["embed-stats"] = p
    return parser, leaves


def parse_args(argv):
    parser, leaves = build_parser()
    # first pass only locates the subcommand and --config, so required flags may come from the file
    required = {key: [a for a in leaf._actions if a.required] for key, leaf in leaves.items()}
    for actions in required.values():
        for a in actions:
            a.required = False
    try:
        first = parser.parse_args(argv)
    finally:
        for actions in required.values():
            for a in actions:
                a.required = True
    key = first.command if first.command != "features" else f"features {first.features_command}"
    if first.config is not None:
        leaf = leaves[key]
        values = load_flat_config(first.config)
        known = {a.dest for a in leaf._actions} - {"help", "config"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"{first.config}: unknown key(s) for '{key}': {', '.join(unknown)}")
        for action in required[key]:
            if action.dest in values:
                action.required = False
        leaf.set_defaults(**values)
    args = parser.parse_args(argv)
    args.key = key
    return args


# -- commands ----------------------------------------------------------------

def cmd_simulate(args):
    temps = _resolve_temps(args)
    manifest = generate_dataset(args.out, temps, args.per_temp, args.n, args.seed,
                                max_steps=args.max_steps, workers=args.workers)
    images = manifest.load_images().reshape(len(temps), args.per_temp, args.n, args.n)
    mags = np.array([[abs(magnetization(image_to_lattice(im))) for im in row] for row in images])
    with open(args.out / "magnetization.csv", "w") as fh:
        fh.write("temperature,mean_abs_m,std_abs_m,count\n")
        for t, m in zip(temps, mags):
            fh.write(f"{format_f32(t)},{float(m.mean())!r},{float(m.std())!r},{len(m)}\n")
    if args.plots:
        plotting.plot_magnetization(temps, mags.mean(1), mags.std(1), args.out / "magnetization.png",
                                    examples=images[:, 0])
    print(f"wrote {len(manifest)} images to {args.out}")


def cmd_calibrate(args):
    manifest = load_manifest(args.dataset)
    rmap = psd.build_response_map(manifest, args.kmin, args.kmax)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    rmap.to_csv(args.out)
    if args.plots:
        plotting.plot_response_map(rmap, args.out.with_suffix(".png"))
    print(f"response map with {len(rmap.temperatures)} knots -> {args.out}")


def cmd_invert(args):
    rmap = psd.ResponseMap.from_csv(args.map)
    paths = list(args.images)
    if args.dataset is not None:
        paths += load_manifest(args.dataset).paths()
    if not paths:
        raise ValidationError("no images given (use --images or --dataset)")
    images = np.stack([read_pgm(p) for p in paths])
    t_hat, feats = harness.recover_temperatures(images, rmap, args.kmin, args.kmax)
    lines = ["filename,slope,intercept,t_hat"]
    lines += [f"{p},{float(f[0])!r},{float(f[1])!r},{float(t)!r}" for p, f, t in zip(paths, feats, t_hat)]
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)


def _train_config(args) -> gan.TrainConfig:
    return gan.TrainConfig(
        n=32, noise_dim=args.noise_dim, embedding_dim=args.embedding_dim, g_hidden=args.g_hidden,
        d_hidden=args.d_hidden, strategy=args.strategy, num_classes=args.num_classes,
        scalar_hidden=args.scalar_hidden, branch_widths=tuple(args.branch_widths), polarity=args.polarity,
        steps=args.steps, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, betas=tuple(args.betas),
        d_steps=args.d_steps, loss=args.loss, fake_labels=args.fake_labels, mismatch=args.mismatch,
        straight_through=args.straight_through, seed=args.seed, dataset=str(args.dataset),
    )


def cmd_train(args):
    manifest = load_manifest(args.dataset)
    first = read_pgm(manifest.paths()[0]) if len(manifest) else None
    if first is None:
        raise ValidationError(f"dataset {args.dataset} is empty")
    if args.resume is not None:
        state = ckpt.load_checkpoint(args.resume)
        state.config.steps, state.config.epochs = args.steps, args.epochs
        cfg = state.config
    else:
        cfg = _train_config(args)
        cfg.n = first.shape[0]
        state = None
    images, labels = gan.load_training_data(manifest, cfg.n)
    args.out.mkdir(parents=True, exist_ok=True)

    def snapshot(st):
        if args.checkpoint_every and st.step % args.checkpoint_every == 0:
            ckpt.save_checkpoint(args.out / f"checkpoint_step{st.step:06d}.bcgn", st)

    state = gan.train(cfg, images, labels, state=state, callback=snapshot)
    ckpt.save_checkpoint(args.out / "checkpoint.bcgn", state)
    gan.write_loss_log(args.out / "loss_log.csv", state.loss_log)
    if args.plots:
        plotting.plot_losses(state.loss_log, args.out / "losses.png")
    s, d, g = state.loss_log[-1] if state.loss_log else (state.step, float("nan"), float("nan"))
    print(f"trained to step {state.step}: d_loss {d:.4f} g_loss {g:.4f} -> {args.out / 'checkpoint.bcgn'}")


def cmd_evaluate(args):
    state = ckpt.load_checkpoint(args.checkpoint)
    rmap = psd.ResponseMap.from_csv(args.map)
    temps = _resolve_temps(args)
    args.out.mkdir(parents=True, exist_ok=True)
    report = harness.run_evaluation_sweep(state, rmap, temps, args.samples, seed=args.seed,
                                          kmin=args.kmin, kmax=args.kmax, sample_dir=args.out / "samples")
    report.to_csv(args.out / "eval.csv")
    if args.plots:
        plotting.plot_evaluation(report, rmap, args.out / "evaluation.png")
    print(f"Pearson(T, mean T_hat) = {report.pearson():.4f} -> {args.out / 'eval.csv'}")


def cmd_sensitivity(args):
    state = ckpt.load_checkpoint(args.checkpoint)
    seeds = range(args.seed, args.seed + args.num_seeds)
    report = harness.run_sensitivity(state, args.base_t, args.epsilons, seeds, out_dir=args.out / "diffs")
    report.to_csv(args.out / "sensitivity.csv")
    if args.plots:
        plotting.plot_sensitivity(report, args.out / "sensitivity.png")
    for e, m in zip(report.epsilons, report.mean_changed()):
        print(f"eps={e:g}: mean changed fraction {m:.4f}")


def cmd_embed_stats(args):
    if args.checkpoint is not None:
        state = ckpt.load_checkpoint(args.checkpoint)
        net = state.generator if args.network == "G" else state.discriminator
        strategy = net.embed
    else:
        strategy = make_strategy(args.strategy, args.embedding_dim, np.random.default_rng([args.seed]),
                                 num_classes=args.num_classes)
    matrix = embed_stats.sweep_activations(strategy, args.samples)
    stats = embed_stats.boxplot_stats(matrix)
    dead = embed_stats.dead_mask(matrix, args.tau)
    args.out.mkdir(parents=True, exist_ok=True)
    embed_stats.write_stats_csv(args.out / "embed_stats.csv", stats, dead)
    frac = embed_stats.dead_fraction(matrix, args.tau)
    if args.plots:
        plotting.plot_neuron_boxplots(matrix, args.out / "embed_stats.png", args.max_neurons,
                                      title=f"{strategy.kind}: dead fraction {frac:.3f}")
    print(f"{strategy.kind} embedding: {matrix.shape[0]} neurons, dead fraction {frac:.4f} (tau={args.tau:g})")


COMMANDS = {
    "simulate": cmd_simulate,
    "features calibrate": cmd_calibrate,
    "features invert": cmd_invert,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sensitivity": cmd_sensitivity,
    "embed-stats": cmd_embed_stats,
}


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except (ValidationError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.key](args)
    except FileNotFoundError as exc:  # missing input is a usage problem
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (gan.TrainingDiverged, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # includes ValidationError, ConfigError, CheckpointError
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("unexpected failure")
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
