"""Command-line driver.

Every subcommand reads an optional flat ``key = value`` config file
(``--config``); any key may also be given as a ``--key value`` flag, which
wins over the file. Run ``vickrey <command> --help`` for the key list.

Exit codes: 0 success, 1 configuration or input error, 2 out-of-vocabulary
token under the strict policy, 3 metric-DP violation flagged by ``dpcheck``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audit import (
    AuditMetric,
    Auditor,
    AuditSettings,
    Prior,
    SentimentLexicon,
    empirical_dp_check,
    write_reports_csv,
)
from .embeddings import load_embeddings, nn_distance_stats, read_word_list
from .errors import BudgetUnreachable, ConfigError, OutOfVocabulary, VickreyError
from .mechanisms import Mechanism, MechanismConfig, redact_corpus
from .tuner import DEFAULT_T_GRID, TunerConfig, family, sweep, tune

log = logging.getLogger("vickrey")


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s) -> tuple[float, ...]:
    if isinstance(s, (list, tuple)):
        return tuple(float(x) for x in s)
    return tuple(float(x) for x in str(s).replace(",", " ").split())


@dataclass(frozen=True)
class Key:
    type: object
    default: object
    help: str


SCHEMA: dict[str, Key] = {
    "embeddings": Key(str, None, "embedding file path"),
    "format": Key(str, "glove-text", "glove-text | fasttext-text"),
    "limit": Key(int, None, "read only the first N embedding rows"),
    "redactable": Key(str, None, "newline-delimited list of words subject to redaction"),
    "lexicon_pos": Key(str, None, "positive sentiment word list"),
    "lexicon_neg": Key(str, None, "negative sentiment word list"),
    "corpus": Key(str, None, "newline-delimited documents, whitespace-tokenized"),
    "variant": Key(str, "vickrey", "vickrey | generalized | snn | nth | identity"),
    "epsilon": Key(float, 10.0, "privacy parameter"),
    "t": Key(float, 0.0, "vickrey tuning parameter in [0, 1]"),
    "weights": Key(_floats, (), "generalized variant weights, comma separated"),
    "rank": Key(int, 1, "neighbor rank for the nth variant"),
    "noise": Key(str, "euclidean", "euclidean | mahalanobis"),
    "cov_lambda": Key(float, 0.5, "Mahalanobis covariance regularization in [0, 1]"),
    "candidates": Key(str, "include-input", "include-input | exclude-input"),
    "selection": Key(str, "euclidean", "neighbor ranking metric: euclidean | noise"),
    "prior": Key(str, "auto", "uniform | empirical | auto"),
    "d_e": Key(str, "indicator", "privacy metric: indicator | euclidean"),
    "d_l": Key(str, "auto", "utility metric: indicator | euclidean | sentiment | auto"),
    "strict_lexicon": Key(_bool, False, "fail when an output word has no sentiment label"),
    "samples": Key(int, 10000, "Monte-Carlo samples per word"),
    "repetitions": Key(int, 1, "independent audit repetitions for error bars"),
    "adversary": Key(str, "posterior", "posterior | map"),
    "exact": Key(_bool, False, "exact 1-d transition kernel instead of Monte Carlo"),
    "seed": Key(int, 0, "master seed"),
    "threads": Key(int, 1, "worker threads"),
    "output": Key(str, "out", "output directory"),
    "oov": Key(str, "error", "out-of-vocabulary policy: error | pass"),
    "budget": Key(float, None, "utility-loss budget C for tune"),
    "epsilon0": Key(float, 0.25, "initial epsilon for tune"),
    "t_grid": Key(_floats, None, "t values (tune default 0.05..1, sweep default 0,0.25,..,1)"),
    "max_doublings": Key(int, 40, "epsilon doubling cap for tune"),
    "eps_grid": Key(_floats, (0.5, 1, 2, 4, 8, 16), "epsilon grid for sweep"),
    "variant_grid": Key(str, None, "sweep variants: ';'-separated 'key=value ...' overrides"),
    "pairs": Key(str, None, "dpcheck word pairs file ('w1 w2' per line); default all pairs"),
    "confidence": Key(float, 0.999, "dpcheck one-sided confidence"),
    "min_count": Key(int, 50, "dpcheck minimum numerator count"),
}


def read_config_file(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (x.strip() for x in s.split("=", 1))
        k = k.replace("-", "_")
        if k not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {k!r}")
        out[k] = v
    return out


def resolve(file_values: dict, flags: dict) -> dict:
    cfg = {}
    for k, key_def in SCHEMA.items():
        raw = flags.get(k)
        if raw is None:
            raw = file_values.get(k)
        if raw is None:
            cfg[k] = key_def.default
            continue
        try:
            cfg[k] = key_def.type(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {raw!r} ({exc})") from None
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _meta(cfg, command):
    return {"command": command, "config_hash": config_hash(cfg), "seed": cfg["seed"]}


def _comment(cfg, command):
    m = _meta(cfg, command)
    return f"command={m['command']} config_hash={m['config_hash']} seed={m['seed']}"


# --------------------------------------------------------------------------

class Setup:
    """Inputs resolved from a config: store, word sets, lexicon, corpus."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        if not cfg["embeddings"]:
            raise ConfigError("no embeddings file given")
        self.store = load_embeddings(cfg["embeddings"], cfg["format"], limit=cfg["limit"])
        self.lexicon = None
        if cfg["lexicon_pos"] or cfg["lexicon_neg"]:
            if not (cfg["lexicon_pos"] and cfg["lexicon_neg"]):
                raise ConfigError("both lexicon_pos and lexicon_neg are required")
            self.lexicon = SentimentLexicon.from_files(cfg["lexicon_pos"], cfg["lexicon_neg"])
        self.docs = None
        if cfg["corpus"]:
            text = Path(cfg["corpus"]).read_text(encoding="utf-8")
            self.docs = [line.split() for line in text.splitlines()]
        if cfg["redactable"]:
            self.redactable_words = read_word_list(cfg["redactable"])
        elif self.lexicon is not None:
            self.redactable_words = self.lexicon.words()
        else:
            self.redactable_words = None

    @property
    def redactable_ids(self) -> np.ndarray:
        if self.redactable_words is None:
            return np.arange(self.store.n)
        ids = np.unique(self.store.ids_of(self.redactable_words))
        if ids.size == 0:
            raise ConfigError("no redactable word is in the embedding vocabulary")
        return ids

    def mechanism_config(self) -> MechanismConfig:
        c = self.cfg
        try:
            return MechanismConfig(
                epsilon=c["epsilon"], variant=c["variant"], t=c["t"], weights=c["weights"],
                rank=c["rank"], noise=c["noise"], candidates=c["candidates"],
                selection=c["selection"], cov_lambda=c["cov_lambda"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def prior(self) -> Prior:
        ids = self.redactable_ids
        kind = self.cfg["prior"]
        if kind == "auto":
            kind = "empirical" if self.docs is not None else "uniform"
        if kind == "uniform":
            return Prior.uniform(ids)
        if kind == "empirical":
            if self.docs is None:
                raise ConfigError("empirical prior needs a corpus")
            return Prior.from_corpus(self.store, ids, self.docs)
        raise ConfigError(f"unknown prior {kind!r}")

    def auditor(self) -> Auditor:
        c = self.cfg
        d_l = c["d_l"]
        if d_l == "auto":
            d_l = "sentiment" if self.lexicon is not None else "indicator"
        if d_l == "sentiment" and self.lexicon is None:
            raise ConfigError("sentiment utility loss needs lexicon_pos and lexicon_neg")
        if c["adversary"] not in ("posterior", "map"):
            raise ConfigError(f"unknown adversary {c['adversary']!r}")
        try:
            d_E = AuditMetric(c["d_e"])
            d_L = AuditMetric(d_l, self.lexicon, strict=c["strict_lexicon"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        settings = AuditSettings(n_samples=c["samples"], exact=c["exact"], adversary=c["adversary"],
                                 seed=c["seed"], threads=c["threads"])
        return Auditor(self.store, self.prior(), d_E, d_L, settings)


def _outdir(cfg) -> Path:
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


# --------------------------------------------------------------------------
# commands

def cmd_redact(cfg) -> int:
    setup = Setup(cfg)
    if setup.docs is None:
        raise ConfigError("redact needs a corpus")
    mech = Mechanism(setup.store, setup.mechanism_config())
    if cfg["oov"] not in ("error", "pass"):
        raise ConfigError(f"unknown oov policy {cfg['oov']!r}")
    # lexicon words define the audit set, not what gets redacted
    redactable = set(read_word_list(cfg["redactable"])) if cfg["redactable"] else None
    try:
        out = redact_corpus(setup.docs, mech, cfg["seed"], oov=cfg["oov"],
                            redactable=redactable, threads=cfg["threads"])
    except OutOfVocabulary as exc:
        doc, pos = exc.position if isinstance(exc.position, tuple) else (0, exc.position)
        print(f"error: out-of-vocabulary token {exc.token!r} in document {doc} at position {pos}",
              file=sys.stderr)
        return 2
    od = _outdir(cfg)
    with open(od / "redacted.txt", "w", encoding="utf-8") as fh:
        for doc in out:
            fh.write(" ".join(doc) + "\n")
    summary = []
    for d, (src, dst) in enumerate(zip(setup.docs, out)):
        changed = sum(a != b for a, b in zip(src, dst))
        summary.append({"document": d, "tokens": len(src), "changed": changed})
    _write_json(od / "trace_summary.json", {"meta": _meta(cfg, "redact"),
                                            "mechanism": mech.config.to_dict(),
                                            "documents": summary})
    return 0


def cmd_audit(cfg) -> int:
    setup = Setup(cfg)
    auditor = setup.auditor()
    mc = setup.mechanism_config()
    f = auditor.transition(mc)
    report = auditor.evaluate(f, mc)
    if cfg["repetitions"] > 1 and not cfg["exact"]:
        report = auditor.audit_repeated(mc, cfg["repetitions"])
    od = _outdir(cfg)
    _write_json(od / "audit.json", {"meta": _meta(cfg, "audit"), "report": report.to_dict()})
    with open(od / "transition.csv", "w", encoding="utf-8", newline="") as fh:
        f.to_csv(fh, setup.store.vocab, comment=_comment(cfg, "audit"))
    print(json.dumps(report.to_dict(), sort_keys=True, default=_jsonable))
    return 0


def cmd_tune(cfg) -> int:
    if cfg["budget"] is None:
        raise ConfigError("tune needs a budget")
    setup = Setup(cfg)
    auditor = setup.auditor()
    tc = TunerConfig(budget=cfg["budget"], epsilon0=cfg["epsilon0"],
                     t_grid=cfg["t_grid"] or DEFAULT_T_GRID, max_doublings=cfg["max_doublings"])
    base = setup.mechanism_config().replace(variant="vickrey")
    od = _outdir(cfg)
    try:
        res = tune(family(auditor, base), tc)
    except BudgetUnreachable as exc:
        _write_json(od / "tune.json", {"meta": _meta(cfg, "tune"), "error": str(exc),
                                       "epsilon": exc.epsilon, "utility_loss": exc.loss})
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_json(od / "tune.json", {
        "meta": _meta(cfg, "tune"),
        "epsilon_opt": res.epsilon,
        "t_opt": res.t,
        "report": res.report.to_dict(),
        "log": [r.to_dict() for r in res.log],
    })
    with open(od / "search_log.csv", "w", encoding="utf-8", newline="") as fh:
        write_reports_csv(fh, res.log, comment=_comment(cfg, "tune"))
    print(json.dumps({"epsilon_opt": res.epsilon, "t_opt": res.t,
                      "inference_error": res.report.inference_error,
                      "utility_loss": res.report.utility_loss}))
    return 0


def parse_variant_grid(text: str) -> list[dict]:
    out = []
    for entry in text.split(";"):
        entry = entry.strip()
        if not entry:
            continue
        d = {}
        for tok in entry.split():
            if "=" not in tok:
                raise ConfigError(f"bad variant grid entry {tok!r}")
            k, v = tok.split("=", 1)
            if k == "t" or k == "cov_lambda":
                d[k] = float(v)
            elif k == "rank":
                d[k] = int(v)
            elif k == "weights":
                d[k] = tuple(float(x) for x in v.split("/"))
            elif k in ("variant", "candidates", "noise", "selection"):
                d[k] = v
            else:
                raise ConfigError(f"unknown variant grid key {k!r}")
        out.append(d)
    if not out:
        raise ConfigError("empty variant grid")
    return out


def cmd_sweep(cfg) -> int:
    setup = Setup(cfg)
    auditor = setup.auditor()
    if cfg["variant_grid"]:
        variants = parse_variant_grid(cfg["variant_grid"])
    else:
        variants = [{"t": t} for t in (cfg["t_grid"] or (0.0, 0.25, 0.5, 0.75, 1.0))]
    try:
        curve = sweep(auditor, setup.mechanism_config(), cfg["eps_grid"], variants, cfg["repetitions"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    od = _outdir(cfg)
    with open(od / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        curve.to_csv(fh, comment=_comment(cfg, "sweep"))
    return 0


def _read_pairs(path, store):
    pairs = []
    for line in read_word_list(path):
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"bad pair line {line!r}")
        pairs.append((store.id_of(parts[0]), store.id_of(parts[1])))
    return pairs


def cmd_dpcheck(cfg) -> int:
    setup = Setup(cfg)
    mech = Mechanism(setup.store, setup.mechanism_config())
    if cfg["pairs"]:
        try:
            pairs = _read_pairs(cfg["pairs"], setup.store)
        except KeyError as exc:
            raise ConfigError(f"pair word not in vocabulary: {exc}") from None
    else:
        ids = setup.redactable_ids
        pairs = [(a, b) for a in ids for b in ids if a != b]
    rep = empirical_dp_check(mech, pairs, cfg["samples"], seed=cfg["seed"],
                             confidence=cfg["confidence"], min_count=cfg["min_count"],
                             threads=cfg["threads"])
    od = _outdir(cfg)
    with open(od / "dpcheck.csv", "w", encoding="utf-8", newline="") as fh:
        rep.to_csv(fh, setup.store.vocab, comment=_comment(cfg, "dpcheck"))
    n_viol = len(rep.violations)
    print(json.dumps({"cells": len(rep.cells), "untestable": rep.untestable, "violations": n_viol}))
    return 3 if n_viol else 0


def cmd_inspect(cfg) -> int:
    setup = Setup(cfg)
    stats = nn_distance_stats(setup.store, seed=cfg["seed"])
    stats["name"] = setup.store.name
    if setup.redactable_words is not None:
        stats["redactable_in_vocab"] = int(setup.redactable_ids.size)
        stats["redactable_listed"] = len(setup.redactable_words)
    od = _outdir(cfg)
    _write_json(od / "inspect.json", {"meta": _meta(cfg, "inspect"), "stats": stats})
    print(json.dumps(stats, sort_keys=True))
    return 0


COMMANDS = {
    "redact": (cmd_redact, "redact a corpus"),
    "audit": (cmd_audit, "estimate inference error and utility loss for one mechanism"),
    "tune": (cmd_tune, "budget-constrained (epsilon, t) selection"),
    "sweep": (cmd_sweep, "audit an (epsilon, variant) grid into a CSV tradeoff curve"),
    "dpcheck": (cmd_dpcheck, "statistical metric-DP check; exit 3 on violation"),
    "inspect": (cmd_inspect, "embedding statistics"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vickrey", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="flat key = value config file")
        for key, key_def in SCHEMA.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=key_def.help)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k in SCHEMA and v is not None}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve(file_values, flags)
        return COMMANDS[args.command][0](cfg)
    except (VickreyError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
