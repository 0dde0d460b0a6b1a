"""Command-line front-end.

    naestudio toy -o toy.wav
    naestudio decompose toy.wav --layers 3,9 -o bundle/
    naestudio render bundle/ --all -o out/
    naestudio manipulate bundle/ --permute 1 --seed 7 -o derived/
    naestudio plot bundle/ -o report/
    naestudio serve bundle/ --port 8765

Exit codes: 0 success, 1 invalid configuration or arguments, 2 I/O or
format failure, 3 numeric failure, 4 service port busy.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

import numpy as np

from .audio import load_wav, save_wav
from .bundle import (
    LOSS_FILE,
    SCRIPTS_DIR,
    load_bundle,
    write_bundle,
)
from .deconstruct import hierarchical_select
from .errors import (
    ConfigError,
    FormatError,
    InputError,
    IoError,
    NumericError,
    ProvenanceError,
    ShapeError,
)
from .manipulate import ManipulationOp, ManipulationScript, apply_script, resolve_op
from .model import NaeConfig, init_model, model_hash
from .resynth import RenderSpec, hierarchical_mask, render, render_component
from .stft import StftParams, analyze
from .toy import toy_mixture
from .training import TrainConfig, default_sparsity, train


def _parse_layers(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse layer sizes from {text!r}")
    if not sizes:
        raise ConfigError("at least one layer size is required")
    return sizes


def _parse_index_list(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse index list from {text!r}")


def _peak_limit(samples: np.ndarray, limit: float = 0.99) -> np.ndarray:
    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak > limit:
        samples = samples * (limit / peak)
    return samples


def cmd_toy(args) -> int:
    mix = toy_mixture(seed=args.seed)
    save_wav(args.output, mix.samples, mix.sample_rate)
    print(f"wrote {args.output} ({mix.samples.size} samples at {mix.sample_rate} Hz)")
    return 0


def cmd_decompose(args) -> int:
    samples, sample_rate = load_wav(args.input)
    params = StftParams(
        window_size=args.window, hop_size=args.hop, sample_rate=sample_rate
    )
    spectrogram = analyze(samples, params)
    layers = _parse_layers(args.layers)
    config = NaeConfig(
        input_dim=spectrogram.num_bins, layer_sizes=layers, seed=args.seed
    )
    lam = default_sparsity(len(layers)) if args.sparsity is None else args.sparsity
    train_config = TrainConfig(
        iterations=args.iters,
        learning_rate=args.lr,
        sparsity_lambda=lam,
        log_every=args.log_every,
    )

    model = init_model(config)
    model, report = train(model, spectrogram, train_config)
    if report.aborted:
        print(f"error: training aborted: {report.message}", file=sys.stderr)
        return 3

    settings = {
        "iterations": train_config.iterations,
        "learning_rate": train_config.learning_rate,
        "rmsprop_decay": train_config.rmsprop_decay,
        "rmsprop_epsilon": train_config.rmsprop_epsilon,
        "sparsity_lambda": train_config.sparsity_lambda,
        "loss_epsilon": train_config.loss_epsilon,
        "seed": args.seed,
    }
    bundle = write_bundle(
        args.output,
        source=args.input,
        samples=samples,
        sample_rate=sample_rate,
        model=model,
        params=params,
        report=report,
        train_settings=settings,
    )

    dims = [config.latent_dim] + list(config.layer_sizes[1:]) + [config.input_dim]
    print(f"bundle: {bundle.root}")
    print(f"model hash: {bundle.model_hash}")
    print(f"layer sizes: latent {config.latent_dim}, decoder "
          + " -> ".join(str(d) for d in dims))
    print(f"final loss: {report.final_loss:.6f} "
          f"(initial {report.loss_history[0][1]:.6f}, {report.wall_time_seconds:.1f}s)")
    return 0


def _write_render(path: Path, samples: np.ndarray, sample_rate: int, limit: bool) -> None:
    if limit:
        samples = _peak_limit(samples)
    save_wav(path, samples, sample_rate)
    print(f"wrote {path}")


def cmd_render(args) -> int:
    bundle = load_bundle(args.bundle)
    cset = bundle.component_set()
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rate = bundle.sample_rate
    k_outer = cset.spectra.shape[1]

    requested = [
        name
        for name, flag in (
            ("--all", args.all),
            ("--component", args.component is not None),
            ("--cross", args.cross is not None),
            ("--hier", args.hier is not None),
        )
        if flag
    ]
    if len(requested) != 1:
        raise ConfigError(
            f"exactly one of --all/--component/--cross/--hier is required, got {requested}"
        )

    if args.all:
        total = np.zeros_like(bundle.samples)
        for k in range(k_outer):
            rendered = render_component(cset, RenderSpec.original(k))
            total = total + rendered.audio
            _write_render(out / f"component_{k}.wav", rendered.audio, rate, args.peak_limit)
        _write_render(out / "sum.wav", total, rate, args.peak_limit)
    elif args.component is not None:
        rendered = render_component(cset, RenderSpec.original(args.component))
        _write_render(out / f"component_{args.component}.wav", rendered.audio, rate, args.peak_limit)
    elif args.cross is not None:
        pair = _parse_index_list(args.cross)
        if len(pair) != 2:
            raise ConfigError(f"--cross expects i,j, got {args.cross!r}")
        i, j = pair
        m = args.layer if args.layer is not None else cset.num_layers
        if m == cset.num_layers:
            spec = RenderSpec.cross_component(i, j, gamma=args.gamma)
        else:
            spec = RenderSpec.cross_layer(i, j, layer=m, gamma=args.gamma)
        rendered = render_component(cset, spec)
        name = f"cross_{i}_{j}_layer{m}.wav"
        _write_render(out / name, rendered.audio, rate, args.peak_limit)
    else:
        selected = hierarchical_select(cset, args.hier)
        for k in range(k_outer):
            if selected.layers[-1].silent[k]:
                continue
            mask = hierarchical_mask(cset, selected, k)
            rendered = render(cset.spectrogram, mask)
            _write_render(
                out / f"hier_{args.hier}_component_{k}.wav", rendered.audio, rate, args.peak_limit
            )
    return 0


def cmd_manipulate(args) -> int:
    bundle = load_bundle(args.bundle)
    base_hash = model_hash(bundle.model)

    chosen = [
        name
        for name, flag in (
            ("--script", args.script is not None),
            ("--permute", args.permute is not None),
            ("--randomize", args.randomize is not None),
            ("--jitter", args.jitter is not None),
        )
        if flag
    ]
    if len(chosen) != 1:
        raise ConfigError(
            f"exactly one of --script/--permute/--randomize/--jitter is required, got {chosen}"
        )

    if args.script is not None:
        script = ManipulationScript.load(args.script)
    else:
        if args.permute is not None:
            op = ManipulationOp(
                kind="permute_columns",
                layer=args.permute,
                seed=args.seed,
                avoid_fixed_points=args.no_fixed_points,
            )
        elif args.randomize is not None:
            if args.dist is None:
                raise ConfigError("--randomize requires --dist (u:a,b or n:mu,sigma)")
            tag, _, rest = args.dist.partition(":")
            bounds = tuple(float(v) for v in rest.split(","))
            if len(bounds) != 2:
                raise ConfigError(f"--dist expects two parameters, got {args.dist!r}")
            distribution = {"u": "uniform", "n": "truncated_normal"}.get(tag)
            if distribution is None:
                raise ConfigError(f"unknown distribution tag {tag!r} (use u: or n:)")
            op = ManipulationOp(
                kind="randomize_replace",
                layer=args.randomize,
                columns=_parse_index_list(args.cols),
                distribution=distribution,
                bounds=bounds,
                seed=args.seed,
            )
        else:
            op = ManipulationOp(
                kind="randomize_multiplicative",
                layer=args.jitter,
                columns=_parse_index_list(args.cols),
                delta=args.delta,
                seed=args.seed,
            )
        op = resolve_op(bundle.model, op)
        script = ManipulationScript(base_model_hash=base_hash, ops=[op])

    derived = apply_script(bundle.model, script)

    out_bundle = write_bundle(
        args.output,
        source=bundle.root / "source.wav",
        samples=bundle.samples,
        sample_rate=bundle.sample_rate,
        model=derived,
        params=bundle.stft_params,
        report=None,
        train_settings=bundle.metadata.get("train", {}),
        base_hash=base_hash,
        script_text=script.to_json(),
    )
    print(f"derived bundle: {out_bundle.root}")
    print(f"base model: {base_hash}")
    print(f"derived model: {out_bundle.model_hash}")
    print(f"script: {out_bundle.root / SCRIPTS_DIR / 'applied.json'}")
    return 0


def cmd_plot(args) -> int:
    from .plots import render_report

    bundle = load_bundle(args.bundle)
    cset = bundle.component_set()
    if args.hier is not None:
        cset = hierarchical_select(cset, args.hier)
    loss_log = bundle.root / LOSS_FILE
    written = render_report(cset, args.output, loss_log if loss_log.exists() else None)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        try:
            probe.bind((args.host, args.port))
        except OSError:
            print(f"error: port {args.port} is busy", file=sys.stderr)
            return 4

    app = create_app(args.bundle)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="naestudio",
        description="Deconstruct a sound into hierarchical non-negative "
        "autoencoder components; resynthesize, recombine, and randomize them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="synthesize the three-source test mixture")
    p.add_argument("-o", "--output", default="toy.wav")
    p.add_argument("--seed", type=int, default=2025)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("decompose", help="train a model on a WAV and write a bundle")
    p.add_argument("input")
    p.add_argument("--layers", default="3,9", help="unit counts, innermost first")
    p.add_argument("--iters", type=int, default=3000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lambda", dest="sparsity", type=float, default=None,
                   help="L1 weight on the outer matrices (default depends on depth)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=2048)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("--log-every", type=int, default=50)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("render", help="render components of a bundle to WAV files")
    p.add_argument("bundle")
    p.add_argument("--component", type=int, default=None, help="original component index")
    p.add_argument("--cross", default=None, help="basis,activation unit pair i,j")
    p.add_argument("--layer", type=int, default=None, help="activation layer for --cross")
    p.add_argument("--gamma", type=float, default=None, help="mask bounding term")
    p.add_argument("--hier", type=int, default=None,
                   help="render outer components fed by this inner unit")
    p.add_argument("--all", action="store_true", help="all original components plus sum.wav")
    p.add_argument("--peak-limit", action="store_true",
                   help="rescale outputs that exceed |1.0| peaks")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("manipulate", help="apply weight edits, write a derived bundle")
    p.add_argument("bundle")
    p.add_argument("--script", default=None, help="replay a saved op script")
    p.add_argument("--permute", type=int, default=None, metavar="LAYER")
    p.add_argument("--no-fixed-points", action="store_true",
                   help="resample permutations until no column keeps its place")
    p.add_argument("--randomize", type=int, default=None, metavar="LAYER")
    p.add_argument("--dist", default=None, help="u:a,b (uniform) or n:mu,sigma (rectified)")
    p.add_argument("--jitter", type=int, default=None, metavar="LAYER")
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--cols", default="", help="target columns, e.g. 0,2 (default all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_manipulate)

    p = sub.add_parser("plot", help="render report figures and CSV tables")
    p.add_argument("bundle")
    p.add_argument("--hier", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("serve", help="serve the bundle over the local session API")
    p.add_argument("bundle")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError, ShapeError, ProvenanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IoError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"error: malformed document: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
