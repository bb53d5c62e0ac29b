"""Command-line entry points orchestrating the full pipeline and experiments.

Exit codes: 0 success (verify: ACCEPT), 1 runtime failure (verify: REJECT),
2 unknown subcommand or invalid configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import brute_force_attack, false_accept_attack
from .colorize import save_colorvein, save_preview_png
from .config import ConfigError, RunConfig, load_config
from .corpus import build_training_corpus, dataset_from_manifest, token_for
from .embedding import (
    Architecture,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .extraction import segment
from .hints import IdentityToken
from .imaging import load_gray, write_pgm
from .matching import enroll, revoke_reissue, verify
from .metrics import compute_eer, decidability, privacy_leakage, unlinkability
from .pipeline import PipelineParams, protect_image
from .protocols import SCENARIOS, ProtocolRunner, RecognitionSystem
from .report import write_json, write_scores_csv, write_stamp, write_svg_histogram
from .store import StoreError, TemplateStore, TokenVault
from .synth import export_corpus, load_manifest


def _pipeline_params(config: RunConfig) -> PipelineParams:
    return PipelineParams(
        m=config.m, lam_hint=config.lam_hint, lam_tone=config.lam_tone,
        sigma=config.sigma,
    )


def _prepare_out(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_stamp(out, config.config_hash(), {"seed": config.seed})
    return out


def _token_from_args(args, config: RunConfig, identity: str, app: str) -> IdentityToken:
    if getattr(args, "token_seed", None):
        return IdentityToken(identity, app, int(args.token_seed, 16))
    return token_for(config.seed, identity, app)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args, config: RunConfig) -> int:
    out = _prepare_out(config)
    manifest = export_corpus(
        out, config.seed, config.n_enrolled, config.n_stolen,
        config.n_samples, (config.dims, config.dims),
    )
    write_json(out / "synth_summary.json", {
        "n_subjects": len({e.subject_id for e in manifest.entries}),
        "n_entries": len(manifest.entries),
        "splits": {name: len(members) for name, members in sorted(manifest.split.items())},
    })
    print(f"synthetic corpus written to {out}")
    return 0


def cmd_segment(args, config: RunConfig) -> int:
    out = _prepare_out(config)
    img = load_gray(args.image)
    pattern = segment(img)
    dest = out / (Path(args.image).stem + "_pattern.pgm")
    write_pgm(pattern, dest)
    print(f"pattern written to {dest} ({pattern.count()} vein pixels)")
    return 0


def cmd_colorize(args, config: RunConfig) -> int:
    out = _prepare_out(config)
    img = load_gray(args.image)
    token = _token_from_args(args, config, args.identity, args.app)
    cv = protect_image(img, token, _pipeline_params(config))
    stem = Path(args.image).stem
    save_colorvein(cv, out / f"{stem}_colorvein.npz")
    save_preview_png(cv, out / f"{stem}_preview.png")
    print(f"colorized {args.image} under token {token.fingerprint()}")
    return 0


def cmd_train(args, config: RunConfig) -> int:
    out = _prepare_out(config)
    manifest = load_manifest(config.manifest)
    dataset = dataset_from_manifest(manifest, Path(config.manifest).parent)
    params = _pipeline_params(config)
    dims = (config.dims, config.dims)
    corpus = build_training_corpus(dataset, dims, params, config.seed)
    train_config = TrainConfig(
        epochs=config.epochs, batch_size=config.batch_size, lr=config.lr,
        seed=config.seed, lambdas=config.lambdas, margin=config.margin,
        weight_decay=config.weight_decay,
    )
    arch = Architecture(input_hw=dims, activation="softplus")
    result = train(corpus, train_config, arch=arch)
    save_checkpoint(config.checkpoint, result.model, result.centers,
                    config.config_hash(), corpus.class_names)
    lines = ["epoch,L_S,L_SC,L"]
    for row in result.history:
        lines.append(f"{row['epoch']},{row['L_S']!r},{row['L_SC']!r},{row['L']!r}")
    (out / "loss_history.csv").write_text("\n".join(lines) + "\n")
    print(f"checkpoint written to {config.checkpoint} "
          f"(final loss {result.history[-1]['L']:.6g})")
    return 0


def cmd_enroll(args, config: RunConfig) -> int:
    model, _, _ = load_checkpoint(config.checkpoint)
    store = TemplateStore(config.store)
    vault = TokenVault(config.vault)
    token = _token_from_args(args, config, args.identity, args.app)
    images = [load_gray(p) for p in args.images]
    record = enroll(args.identity, images, token, model, store, vault,
                    _pipeline_params(config))
    print(f"enrolled {args.identity} in {args.app} "
          f"(fingerprint {record.token_fingerprint})")
    return 0


def cmd_verify(args, config: RunConfig) -> int:
    model, _, _ = load_checkpoint(config.checkpoint)
    store = TemplateStore(config.store)
    vault = TokenVault(config.vault)
    probe = load_gray(args.image)
    accepted, score = verify(
        probe, args.identity, args.app, config.threshold, model, store, vault,
        _pipeline_params(config),
    )
    print(f"{'ACCEPT' if accepted else 'REJECT'} score={score:.4f} "
          f"threshold={config.threshold:.4f}")
    return 0 if accepted else 1


def cmd_revoke(args, config: RunConfig) -> int:
    model, _, _ = load_checkpoint(config.checkpoint)
    store = TemplateStore(config.store)
    vault = TokenVault(config.vault)
    images = [load_gray(p) for p in args.images]
    record = revoke_reissue(
        args.identity, args.app, int(args.new_seed, 16), store, vault, images,
        model, _pipeline_params(config),
    )
    print(f"reissued {args.identity} in {args.app} "
          f"(new fingerprint {record.token_fingerprint})")
    return 0


def _metric_report(runner: ProtocolRunner, scenario: str, config: RunConfig,
                   dataset) -> tuple[dict, dict]:
    report: dict = {"scenario": scenario, "seed": config.seed}
    scores: dict = {}
    if scenario in ("normal", "stolen"):
        result = runner.run(scenario)
        eer, tau = compute_eer(result.genuine, result.impostor)
        report.update({"eer": eer, "tau": tau})
        scores = {"genuine": result.genuine, "impostor": result.impostor}
    elif scenario in ("cross_app", "revocability"):
        result = runner.run(scenario)
        eer, tau = compute_eer(result.genuine, result.impostor)
        report.update({
            "eer": eer, "tau": tau,
            "d_GI": decidability(result.genuine, result.impostor),
            "d_GP": decidability(result.genuine, result.pseudo_impostor),
            "d_IP": decidability(result.impostor, result.pseudo_impostor),
        })
        scores = {
            "genuine": result.genuine, "impostor": result.impostor,
            "pseudo_impostor": result.pseudo_impostor,
        }
    elif scenario == "linkability":
        result = runner.run(scenario)
        d_sys, _ = unlinkability(result.mated, result.non_mated)
        report["D_sys"] = d_sys
        scores = {"mated": result.mated, "non_mated": result.non_mated}
    elif scenario == "leakage":
        originals_gray, originals_bin, templates = [], [], []
        for subject in dataset.enrolled:
            token = runner.token(subject)
            samples = dataset.images[subject]
            for i in range(len(samples)):
                originals_gray.append(runner.cache.image(subject, i))
                originals_bin.append(runner.cache.mask(subject, i))
                templates.append(runner.vector(subject, i, token))
        report["leakage"] = {
            "grayscale": privacy_leakage(originals_gray, templates, seed=config.seed),
            "binary": privacy_leakage(originals_bin, templates, seed=config.seed),
        }
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    return report, scores


def cmd_evaluate(args, config: RunConfig) -> int:
    out = _prepare_out(config)
    model, _, _ = load_checkpoint(config.checkpoint)
    manifest = load_manifest(config.manifest)
    dataset = dataset_from_manifest(manifest, Path(config.manifest).parent)
    system = RecognitionSystem(model, _pipeline_params(config))
    runner = ProtocolRunner(system, dataset, config.seed)
    scenarios = (
        [config.scenario]
        if config.scenario != "all"
        else ["normal", "stolen", "revocability", "linkability", "leakage"]
    )
    combined: dict = {"seed": config.seed, "scenarios": {}}
    for scenario in scenarios:
        report, scores = _metric_report(runner, scenario, config, dataset)
        combined["scenarios"][scenario] = report
        if scores:
            write_scores_csv(out / f"scores_{scenario}.csv", scores)
            write_svg_histogram(out / f"hist_{scenario}.svg", scores)
    write_json(out / "report.json", combined)
    print(f"evaluation report written to {out / 'report.json'}")
    return 0


def cmd_attack(args, config: RunConfig) -> int:
    out = _prepare_out(config)
    store = TemplateStore(config.store)
    if args.identity and args.app:
        record = store.fetch(args.identity, args.app)
    else:
        records = store.live_records()
        if not records:
            raise StoreError("template store has no live records")
        record = records[0]
    if args.kind == "brute_force":
        report = brute_force_attack(record, config.n_attack, config.seed)
    else:
        report = false_accept_attack(
            record, args.known_fraction, config.n_attack, config.seed,
            fixed_positions=args.fixed_positions,
        )
    payload = report.to_dict()
    payload["target"] = {"identity_id": record.identity_id,
                         "application_id": record.application_id}
    payload["acceptance_rate_at_threshold"] = report.acceptance_rate_at(config.threshold)
    payload["threshold"] = config.threshold
    write_json(out / "attack_report.json", payload)
    scores = {"attack": report.scores}
    write_scores_csv(out / "attack_scores.csv", scores)
    write_svg_histogram(out / "attack_hist.svg", scores)
    print(f"attack report written to {out / 'attack_report.json'} "
          f"(acceptance {payload['acceptance_rate_at_threshold']:.4f} "
          f"at threshold {config.threshold})")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

_CONFIG_FLAGS = (
    ("--seed", int), ("--manifest", str), ("--store", str), ("--vault", str),
    ("--checkpoint", str), ("--scenario", str), ("--m", int), ("--out", str),
    ("--epochs", int), ("--batch-size", int), ("--lr", float),
    ("--margin", float), ("--threshold", float), ("--n-attack", int),
    ("--n-enrolled", int), ("--n-stolen", int), ("--n-samples", int),
    ("--dims", int),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colorvein",
        description="Cancelable vein biometrics via token-bound colorization",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="INI config file")
        for flag, kind in _CONFIG_FLAGS:
            p.add_argument(flag, type=kind, dest=flag.lstrip("-").replace("-", "_"))
        return p

    add("synth", cmd_synth, "generate a synthetic corpus with ground truth")

    p = add("segment", cmd_segment, "segment a vein image")
    p.add_argument("--image", required=True)

    p = add("colorize", cmd_colorize, "colorize one image under a token")
    p.add_argument("--image", required=True)
    p.add_argument("--identity", required=True)
    p.add_argument("--app", default="main")
    p.add_argument("--token-seed", help="128-bit hex seed (default: derived)")

    add("train", cmd_train, "train the protected feature extractor")

    p = add("enroll", cmd_enroll, "enroll an identity from sample images")
    p.add_argument("--image", dest="images", action="append", required=True)
    p.add_argument("--identity", required=True)
    p.add_argument("--app", default="main")
    p.add_argument("--token-seed")

    p = add("verify", cmd_verify, "verify a probe against a claimed identity")
    p.add_argument("--image", required=True)
    p.add_argument("--identity", required=True)
    p.add_argument("--app", default="main")

    p = add("revoke", cmd_revoke, "revoke and reissue with a new token seed")
    p.add_argument("--identity", required=True)
    p.add_argument("--app", default="main")
    p.add_argument("--new-seed", required=True, help="128-bit hex seed")
    p.add_argument("--image", dest="images", action="append", required=True)

    add("evaluate", cmd_evaluate, "run protocols and write the metrics report")

    p = add("attack", cmd_attack, "simulate attacks against a stored template")
    p.add_argument("--kind", choices=("brute_force", "false_accept"),
                   default="brute_force")
    p.add_argument("--identity")
    p.add_argument("--app")
    p.add_argument("--known-fraction", type=float, default=0.5)
    p.add_argument("--fixed-positions", action="store_true")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    override_keys = [flag.lstrip("-").replace("-", "_") for flag, _ in _CONFIG_FLAGS]
    overrides = {k: getattr(args, k, None) for k in override_keys}
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
