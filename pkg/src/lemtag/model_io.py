"""Self-contained model persistence: one gzipped JSON file per model.

The container carries a magic string, a (major, minor) format version, the
model kind and everything needed to reproduce predictions bit for bit:
weights, feature dictionaries, the tree inventory, lexicons and the
configuration snapshot.  Loading a file whose major version is newer than
this reader fails cleanly.
"""

from __future__ import annotations

import gzip
import json
from pathlib import Path
from typing import Union

import numpy as np

from .baselines import MostFrequentLemmatizer, TransducerLemmatizer
from .candidates import SeenLemmaTable, TreeInventory
from .features import FeatureConfig, FeatureDictionary, Lexicon
from .joint import JointTaggerLemmatizer
from .lemmatizer import TreeLemmatizer
from .pipeline import MorphPipeline
from .edit_tree import parse_tree, render_tree
from .tagger import CrfTagger

__all__ = ["save_model", "load_model", "ModelFormatError", "MAGIC", "VERSION"]

MAGIC = "lemtag-model"
VERSION = (1, 0)

AnyModel = Union[
    MostFrequentLemmatizer,
    TransducerLemmatizer,
    TreeLemmatizer,
    CrfTagger,
    MorphPipeline,
    JointTaggerLemmatizer,
]


class ModelFormatError(ValueError):
    """Unreadable or incompatible model file."""


def save_model(model: AnyModel, path: str | Path, kind: str | None = None) -> None:
    kind = kind or _kind_of(model)
    payload = {
        "magic": MAGIC,
        "version": list(VERSION),
        "kind": kind,
        "model": _encode(model),
    }
    with gzip.open(path, "wt", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path: str | Path) -> tuple[str, AnyModel]:
    try:
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as err:
        raise ModelFormatError(f"cannot read model file {path}: {err}") from err
    if not isinstance(payload, dict) or payload.get("magic") != MAGIC:
        raise ModelFormatError(f"{path} is not a model file (bad magic)")
    major, _minor = payload.get("version", (0, 0))
    if major > VERSION[0]:
        raise ModelFormatError(
            f"model format version {payload['version']} is newer than "
            f"supported {list(VERSION)}"
        )
    kind = payload["kind"]
    return kind, _decode(kind, payload["model"])


def _kind_of(model: AnyModel) -> str:
    return {
        MostFrequentLemmatizer: "simple",
        TransducerLemmatizer: "jck",
        TreeLemmatizer: "lemmatizer",
        CrfTagger: "tagger",
        MorphPipeline: "pipeline",
        JointTaggerLemmatizer: "joint",
    }[type(model)]


# ----------------------------------------------------------------------
# encoding
# ----------------------------------------------------------------------


def _encode(model: AnyModel) -> dict:
    if isinstance(model, MostFrequentLemmatizer):
        return {"table": [[f, p, l] for (f, p), l in sorted(model.table_.items())]}
    if isinstance(model, TransducerLemmatizer):
        return {
            "params": _params(model),
            "table": [[f, p, l] for (f, p), l in sorted(model.simple_.table_.items())],
            "alphabet": sorted(model.alphabet_),
            "segments": {s: list(o) for s, o in sorted(model.segment_options_.items())},
            "max_segment": model.max_segment_,
            "weights": dict(sorted(model.weights_.items())),
        }
    if isinstance(model, TreeLemmatizer):
        params = _params(model)
        params.pop("lexicons", None)
        return {
            "params": params,
            "lexicons": _encode_lexicons(model.lexicons),
            "inventory": _encode_inventory(model.inventory_),
            "seen": {f: list(ls) for f, ls in sorted(model.seen_.items())},
            "features": model.dictionary_.names(),
            "theta": model.theta_.tolist(),
            "l2": model.l2_,
        }
    if isinstance(model, CrfTagger):
        return {
            "params": _params(model),
            "tags": model.tags_,
            "features": model.feat_dict_.names(),
            "W": model.W_.tolist(),
            "T1": model.T1_.tolist(),
            "T2": {",".join(map(str, k)): v for k, v in sorted(model.T2_.items())},
            "survival": {str(k): v for k, v in model.survival_.items()},
        }
    if isinstance(model, MorphPipeline):
        return {
            "params": _params(model),
            "tagger": _encode(model.tagger_),
            "lemmatizer": _encode(model.lemmatizer_),
        }
    if isinstance(model, JointTaggerLemmatizer):
        params = _params(model)
        # nested estimators and lexicons are persisted explicitly below
        for key in ("pretrained_tagger", "pretrained_lemmatizer", "lexicons"):
            params.pop(key, None)
        cfg = model.feature_config_
        provenance = {
            "tagger_pretrained": model.pretrained_tagger is not None,
            "lemmatizer_seeded": model.pretrained_lemmatizer is not None,
        }
        provenance.update(getattr(model, "provenance_", {}))
        return {
            "params": params,
            "provenance": provenance,
            "tagger": _encode(model.tagger_),
            "lexicons": _encode_lexicons(model.lexicons_),
            "feature_config": cfg.__dict__.copy(),
            "inventory": _encode_inventory(model.inventory_),
            "seen": {f: list(ls) for f, ls in sorted(model.seen_.items())},
            "features": model.dictionary_.names(),
            "theta": model.theta_.tolist(),
        }
    raise ModelFormatError(f"cannot serialize {type(model).__name__}")


def _params(model) -> dict:
    return dict(model.get_params(deep=False))


def _encode_lexicons(lexicons) -> list[dict]:
    return [
        {"name": lex.name, "words": sorted(lex.entries)} for lex in (lexicons or ())
    ]


def _decode_lexicons(data) -> list[Lexicon]:
    return [Lexicon(d["name"], frozenset(d["words"])) for d in data]


def _encode_inventory(inventory: TreeInventory) -> dict:
    return {
        "min_pair_count": inventory.min_pair_count,
        "trees": [
            [render_tree(t), inventory.counts[t]] for t in inventory.trees
        ],
    }


def _decode_inventory(data) -> TreeInventory:
    trees = [(parse_tree(text), count) for text, count in data["trees"]]
    return TreeInventory(trees, data["min_pair_count"])


# ----------------------------------------------------------------------
# decoding
# ----------------------------------------------------------------------


def _decode(kind: str, data: dict) -> AnyModel:
    if kind == "simple":
        model = MostFrequentLemmatizer()
        model.table_ = {(f, p): l for f, p, l in data["table"]}
        return model
    if kind == "jck":
        model = TransducerLemmatizer(**data["params"])
        model.simple_ = MostFrequentLemmatizer()
        model.simple_.table_ = {(f, p): l for f, p, l in data["table"]}
        model.alphabet_ = set(data["alphabet"])
        model.segment_options_ = {s: tuple(o) for s, o in data["segments"].items()}
        model.max_segment_ = data["max_segment"]
        model.weights_ = dict(data["weights"])
        return model
    if kind == "lemmatizer":
        model = TreeLemmatizer(
            lexicons=_decode_lexicons(data["lexicons"]), **data["params"]
        )
        model.inventory_ = _decode_inventory(data["inventory"])
        model.seen_ = SeenLemmaTable(
            [(f, l) for f, ls in data["seen"].items() for l in ls]
        )
        model.dictionary_ = FeatureDictionary(data["features"]).freeze()
        model.theta_ = np.asarray(data["theta"], dtype=np.float64)
        model.l2_ = data["l2"]
        return model
    if kind == "tagger":
        model = CrfTagger(**_decode_tagger_params(data["params"]))
        _restore_tagger(model, data)
        return model
    if kind == "pipeline":
        model = MorphPipeline(**data["params"])
        model.tagger_ = _decode("tagger", data["tagger"])
        model.lemmatizer_ = _decode("lemmatizer", data["lemmatizer"])
        return model
    if kind == "joint":
        model = JointTaggerLemmatizer(**data["params"])
        model.provenance_ = dict(data.get("provenance", {}))
        model.tagger_ = _decode("tagger", data["tagger"])
        model.lexicons_ = tuple(_decode_lexicons(data["lexicons"]))
        model.feature_config_ = FeatureConfig(**data["feature_config"])
        model.inventory_ = _decode_inventory(data["inventory"])
        model.seen_ = SeenLemmaTable(
            [(f, l) for f, ls in data["seen"].items() for l in ls]
        )
        model.dictionary_ = FeatureDictionary(data["features"]).freeze()
        model.theta_ = np.asarray(data["theta"], dtype=np.float64)
        model._candidate_cache = {}
        model._vector_cache = {}
        return model
    raise ModelFormatError(f"unknown model kind {kind!r}")


def _decode_tagger_params(params: dict) -> dict:
    params = dict(params)
    if isinstance(params.get("prune_threshold"), list):
        params["prune_threshold"] = tuple(params["prune_threshold"])
    return params


def _restore_tagger(model: CrfTagger, data: dict) -> None:
    from .features import MorphTag

    model.tags_ = list(data["tags"])
    model.tag_objs_ = [MorphTag.parse(t) for t in model.tags_]
    model.tag_index_ = {t: i for i, t in enumerate(model.tags_)}
    model.boundary_ = len(model.tags_)
    model.feat_dict_ = FeatureDictionary(data["features"]).freeze()
    model.W_ = np.asarray(data["W"], dtype=np.float64)
    model.T1_ = np.asarray(data["T1"], dtype=np.float64)
    model.T2_ = {
        tuple(int(x) for x in k.split(",")): v for k, v in data["T2"].items()
    }
    model.survival_ = {int(k): v for k, v in data.get("survival", {}).items()}
