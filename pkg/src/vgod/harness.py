"""Experiment runner: injection -> training -> scoring -> combination -> metrics."""
from __future__ import annotations

import copy
import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .arm import ArmConfig, ArmModel, arm_train, recon_score
from .graph import (AttributedGraph, DatasetBundle, OutlierGroundTruth, generate_sbm, load_bundle,
                    load_linqs_citation)
from .injection import (InjectionParams, inject_community_swap, inject_contextual, inject_mixed_cliques,
                        inject_standard, inject_structural_cliques)
from .leakage import degnorm_score, degree_score, l2norm_score
from .metrics import auc, auc_on_subset, aucgap, combine, inliers
from .vbm import VbmConfig, VbmModel, vbm_score, vbm_train

MODELS = ("vgod", "vbm-only", "arm-only", "deg", "l2norm", "degnorm")
INJECTIONS = ("standard", "structural", "contextual", "mixed-q", "swap", "none")
SEED_OFFSET_INDUCTIVE = 10_000


class ConfigError(ValueError):
    pass


def _vgod_model(lr=0.005, self_loop=True, row_norm=False, gnn="gat"):
    return {
        "name": "vgod",
        "vbm": {"hidden": 128, "lr": lr, "epochs": 10, "self_loop": self_loop},
        "arm": {"hidden": 128, "lr": lr, "epochs": 100, "layers": 2, "gnn": gnn, "row_normalize_X": row_norm},
    }


def _unod(dataset, p, self_loop=True):
    return {
        "dataset": dataset,
        "injection": {"kind": "standard", "p": p, "q": 15, "k": 50, "distance": "euclidean"},
        "model": _vgod_model(self_loop=self_loop),
        "combination": {"strategy": "mean-std"},
        "seeds": [0, 1, 2, 3, 4],
    }


PRESETS = {
    "cora-unod": _unod("data/cora", 5),
    "citeseer-unod": _unod("data/citeseer", 5),
    "pubmed-unod": _unod("data/pubmed", 20),
    "flickr-unod": _unod("data/flickr", 15, self_loop=False),
    "cora-mixed-q": {
        "dataset": "data/cora",
        "injection": {"kind": "mixed-q", "qs": [3, 5, 10, 15], "fraction": 0.02},
        "model": {**_vgod_model(), "name": "vbm-only"},
        "combination": {"strategy": "mean-std"},
        "seeds": [0, 1, 2, 3, 4],
    },
    "cora-swap": {
        "dataset": "data/cora",
        "injection": {"kind": "swap", "fraction": 0.1},
        "model": {**_vgod_model(), "name": "vbm-only"},
        "combination": {"strategy": "mean-std"},
        "seeds": [0, 1, 2, 3, 4],
    },
    "weibo": {
        "dataset": "data/weibo",
        "injection": {"kind": "none"},
        "model": _vgod_model(lr=0.01, row_norm=True),
        "combination": {"strategy": "mean-std"},
        "seeds": [0, 1, 2, 3, 4],
    },
    "sbm-unod": {
        "dataset": {"synth": {"n": 2000, "communities": 5, "p_in": 0.012, "p_out": 0.0003,
                              "attr_dim": 32, "attr_sep": 4.0, "seed": 0}},
        "injection": {"kind": "standard", "p": 5, "q": 15, "k": 50, "distance": "euclidean"},
        "model": _vgod_model(),
        "combination": {"strategy": "mean-std"},
        "seeds": [0, 1, 2],
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    dataset: object
    injection: dict
    model: dict
    combination: dict = field(default_factory=lambda: {"strategy": "mean-std"})
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    preset: str | None = None
    inductive: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        preset = raw.get("preset")
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
            raw = _merge(PRESETS[preset], raw)
        unknown = set(raw) - {"dataset", "injection", "model", "combination", "seeds", "preset", "inductive"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for key in ("dataset", "injection", "model"):
            if key not in raw:
                raise ConfigError(f"config is missing {key!r}")
        model = raw["model"]
        if isinstance(model, str):
            model = {"name": model}
        cfg = cls(dataset=raw["dataset"], injection=dict(raw["injection"]), model=dict(model),
                  combination=dict(raw.get("combination", {"strategy": "mean-std"})),
                  seeds=list(raw.get("seeds", [0, 1, 2, 3, 4])), preset=preset,
                  inductive=bool(raw.get("inductive", False)))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(raw)

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        kind = self.injection.get("kind")
        if kind not in INJECTIONS:
            raise ConfigError(f"injection kind must be one of {INJECTIONS}, got {kind!r}")
        if self.model.get("name") not in MODELS:
            raise ConfigError(f"model name must be one of {MODELS}")
        if self.combination.get("strategy", "mean-std") not in ("mean-std", "weighted", "sum-to-unit"):
            raise ConfigError("unknown combination strategy")
        try:
            self.vbm_config(0)
            self.arm_config(0)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad model parameters: {e}") from e
        if not isinstance(self.dataset, (str, dict)):
            raise ConfigError("dataset must be a path or a {'synth': {...}} spec")

    def vbm_config(self, seed: int) -> VbmConfig:
        return VbmConfig(**{**self.model.get("vbm", {}), "seed": seed})

    def arm_config(self, seed: int) -> ArmConfig:
        return ArmConfig(**{**self.model.get("arm", {}), "seed": seed})

    def resolved(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------- datasets

def load_source(dataset) -> DatasetBundle:
    if isinstance(dataset, dict):
        if "synth" not in dataset:
            raise ConfigError("dataset dict must contain 'synth'")
        g = generate_sbm(**dataset["synth"])
        return DatasetBundle(g, OutlierGroundTruth(), {"source": "sbm", **dataset["synth"]})
    path = Path(dataset)
    if not path.is_dir():
        raise ConfigError(f"dataset directory {path} not found")
    content, cites = sorted(path.glob("*.content")), sorted(path.glob("*.cites"))
    if not (path / "edges.txt").is_file() and content and cites:
        g = load_linqs_citation(content[0], cites[0])
        return DatasetBundle(g, OutlierGroundTruth(), {"source": str(path)})
    return load_bundle(path)


def make_bundle(source: DatasetBundle, injection: dict, seed: int) -> DatasetBundle:
    kind = injection["kind"]
    g = source.graph
    params = {k: v for k, v in injection.items() if k != "kind"}
    if kind == "none":
        if not source.truth.all:
            raise ConfigError("injection 'none' needs a dataset with outliers.txt")
        return source
    if kind == "standard":
        b = inject_standard(g, InjectionParams(seed=seed, **params))
    elif kind == "structural":
        b = inject_structural_cliques(g, params.get("p", 5), params.get("q", 15), seed)
    elif kind == "contextual":
        b = inject_contextual(g, params["count"], params.get("k", 50), params.get("distance", "euclidean"), seed)
    elif kind == "mixed-q":
        b = inject_mixed_cliques(g, tuple(params.get("qs", (3, 5, 10, 15))), params.get("fraction", 0.02), seed)
    elif kind == "swap":
        b = inject_community_swap(g, None, params.get("fraction", 0.1), seed)
    else:
        raise ConfigError(f"unknown injection {kind!r}")
    b.provenance.update({"source": source.provenance.get("source"), "injection": injection, "seed": seed})
    return b


# ------------------------------------------------------------------- scoring

@dataclass
class TrainedModels:
    vbm: VbmModel | None = None
    arm: ArmModel | None = None


def train_models(graph: AttributedGraph, config: ExperimentConfig, seed: int) -> TrainedModels:
    name = config.model["name"]
    out = TrainedModels()
    if name in ("vgod", "vbm-only"):
        out.vbm = vbm_train(graph, config.vbm_config(seed))
    if name in ("vgod", "arm-only"):
        out.arm = arm_train(graph, config.arm_config(seed))
    return out


def score_graph(graph: AttributedGraph, models: TrainedModels, config: ExperimentConfig) -> dict:
    """Scores keyed by ``str``, ``attr`` (when the model has them) and ``combined``."""
    name = config.model["name"]
    comb = config.combination
    if name == "deg":
        return {"combined": degree_score(graph)}
    if name == "l2norm":
        return {"combined": l2norm_score(graph)}
    if name == "degnorm":
        return {"str": degree_score(graph), "attr": l2norm_score(graph), "combined": degnorm_score(graph)}
    scores = {}
    if models.vbm is not None:
        scores["str"] = vbm_score(models.vbm, graph)
    if models.arm is not None:
        scores["attr"] = recon_score(models.arm, graph)
    if name == "vgod":
        scores["combined"] = combine(comb.get("strategy", "mean-std"), scores["str"], scores["attr"],
                                     comb.get("alpha", 0.5))
    else:
        scores["combined"] = scores["str"] if name == "vbm-only" else scores["attr"]
    return scores


def evaluate(truth: OutlierGroundTruth, scores: dict) -> dict:
    n = len(scores["combined"])
    o = scores["combined"]
    neg = inliers(truth, n)
    row = {"auc": auc(sorted(truth.all), neg, o)}
    nan = float("nan")
    row["auc_str"] = auc_on_subset(sorted(truth.structural), truth, o) if truth.structural else nan
    row["auc_ctx"] = auc_on_subset(sorted(truth.contextual), truth, o) if truth.contextual else nan
    row["aucgap"] = aucgap(truth, o) if truth.structural and truth.contextual else nan
    for key in ("str", "attr"):
        if key in scores:
            row[f"auc_{key}_score"] = auc(sorted(truth.all), neg, scores[key])
    for tag in sorted(truth.groups):
        row[f"auc[{tag}]"] = auc_on_subset(sorted(truth.groups[tag]), truth, o)
    return row


@dataclass
class Report:
    rows: list
    config: dict
    provenance: dict = field(default_factory=dict)

    @property
    def columns(self) -> list:
        cols = []
        for r in self.rows:
            cols += [c for c in r if c not in cols]
        return cols

    @property
    def mean(self) -> dict:
        out = {"seed": "mean"}
        for c in self.columns:
            if c == "seed":
                continue
            vals = [r[c] for r in self.rows if c in r]
            out[c] = float(np.mean(vals)) if vals else float("nan")
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.columns, restval="")
        w.writeheader()
        for r in self.rows + [self.mean]:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and math.isnan(v):
                return None
            return v
        doc = {
            "config": self.config,
            "provenance": self.provenance,
            "rows": [{k: clean(v) for k, v in r.items()} for r in self.rows],
            "mean": {k: clean(v) for k, v in self.mean.items()},
        }
        return json.dumps(doc, indent=2)

    def write(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.csv").write_text(self.to_csv())
        (directory / "report.json").write_text(self.to_json())


def _timed_row(bundle_train, bundle_eval, config, seed) -> dict:
    models = train_models(bundle_train.graph, config, seed)
    t0 = time.perf_counter()
    scores = score_graph(bundle_eval.graph, models, config)
    infer = time.perf_counter() - t0
    row = {"seed": seed, **evaluate(bundle_eval.truth, scores)}
    if models.vbm is not None and models.vbm.epoch_seconds:
        row["train_s_per_epoch_vbm"] = float(np.mean(models.vbm.epoch_seconds))
    if models.arm is not None and models.arm.epoch_seconds:
        row["train_s_per_epoch_arm"] = float(np.mean(models.arm.epoch_seconds))
    row["inference_s"] = infer
    return row


def run_experiment(config: ExperimentConfig, source: DatasetBundle | None = None) -> Report:
    """Run every seed of ``config``; ``source`` overrides loading ``config.dataset``."""
    source = load_source(config.dataset) if source is None else source
    rows = []
    for seed in config.seeds:
        bundle = make_bundle(source, config.injection, seed)
        if config.inductive:
            eval_bundle = make_bundle(source, config.injection, seed + SEED_OFFSET_INDUCTIVE)
        else:
            eval_bundle = bundle
        rows.append(_timed_row(bundle, eval_bundle, config, seed))
    return Report(rows, config.resolved(), {"source": source.provenance.get("source")})


def run_inductive(train: DatasetBundle, evaluation: DatasetBundle, config: ExperimentConfig) -> Report:
    """Train on ``train`` (per seed) and score ``evaluation`` with frozen parameters."""
    if train.graph.d != evaluation.graph.d:
        raise ValueError(f"attribute dimensions differ: {train.graph.d} vs {evaluation.graph.d}")
    rows = [_timed_row(train, evaluation, config, seed) for seed in config.seeds]
    return Report(rows, {**config.resolved(), "inductive": True})


def run_epoch_trend(config: ExperimentConfig, max_epochs: int, source: DatasetBundle | None = None,
                    seed: int | None = None) -> list:
    """Per-epoch VBM AUC for every outlier group, starting from the untrained model."""
    if config.injection["kind"] not in ("standard", "structural", "mixed-q", "swap"):
        raise ConfigError("epoch trend needs a structural injection")
    source = load_source(config.dataset) if source is None else source
    seed = config.seeds[0] if seed is None else seed
    bundle = make_bundle(source, config.injection, seed)
    truth, g = bundle.truth, bundle.graph
    vcfg = VbmConfig(**{**config.model.get("vbm", {}), "epochs": max_epochs, "seed": seed})
    rows = []

    def observe(epoch, model):
        s = vbm_score(model, g)
        rows.append((epoch, "all", auc_on_subset(sorted(truth.all), truth, s)))
        for tag in sorted(truth.groups):
            rows.append((epoch, tag, auc_on_subset(sorted(truth.groups[tag]), truth, s)))

    vbm_train(g, vcfg, callback=observe)
    return rows


def trend_csv(rows) -> str:
    return "epoch,group,auc\n" + "".join(f"{e},{g},{a:.6f}\n" for e, g, a in rows)


def run_scaling_bench(sizes, avg_degree: float = 6.0, communities: int = 4, attr_dim: int = 32,
                      hidden: int = 128, repeats: int = 3, seed: int = 0) -> list:
    """Inference wall-clock of untrained VBM + ARM on SBMs with a fixed average degree.

    Returns rows ``(n, m, seconds)``; seconds is the best of ``repeats`` passes.
    """
    rows = []
    for n in sizes:
        block = n / communities
        p_in = min(1.0, 0.8 * avg_degree / block)
        p_out = 0.2 * avg_degree / (n - block)
        g = generate_sbm(n, communities, p_in, p_out, attr_dim, 3.0, seed)
        vbm = VbmModel.init(g.d, VbmConfig(hidden=hidden, self_loop=True, seed=seed))
        arm = ArmModel.init(g.d, ArmConfig(hidden=hidden, seed=seed))
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            combine("mean-std", vbm_score(vbm, g), recon_score(arm, g))
            best = min(best, time.perf_counter() - t0)
        rows.append((n, g.m, best))
    return rows


def bench_csv(rows) -> str:
    return "n,m,seconds\n" + "".join(f"{n},{m},{s:.6f}\n" for n, m, s in rows)
