"""Command-line entry point.

Batch compute commands (fuse, infer, eval, ontology, selfcheck) run
single-process; `serve` hosts the annotation HTTP service. Exit codes:
0 ok, 2 usage or schema error, 3 data conflict, 4 environment problem.
"""

from __future__ import annotations

import dataclasses
import json
import socket
import sys
from pathlib import Path

import click
import numpy as np

from . import fileio, selfcheck
from .annotation import AnnotationService, DuplicateShapeError
from .config import RunConfig, load_config
from .fusion import BiCoWeights, FusionDims, bico_forward
from .inference import (
    ClassStats,
    global_embedding,
    kmeans_cluster,
    mode1_closed,
    mode2_open,
    mode3_retrieve,
    rank_by_saliency,
)
from .metrics import LabeledPartition, class_agnostic_miou, la_miou, rla_miou
from .numerics import sigmoid
from .ontology import Adjudication, VocabEntry, apply_adjudications
from .partlets import DecoderDims, DecoderWeights, BlockWeights, decode, init_partlets

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_CONFLICT = 3
EXIT_ENV = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


# --- weight container (de)serialization ------------------------------------


def _array_fields(cls) -> list[str]:
    return [f.name for f in dataclasses.fields(cls) if f.name not in ("dims", "blocks")]


def fusion_to_tensors(w: BiCoWeights) -> dict[str, np.ndarray]:
    return {f"fusion/{name}": np.asarray(getattr(w, name)) for name in _array_fields(BiCoWeights)}


def fusion_from_tensors(tensors: dict[str, np.ndarray], dims: FusionDims) -> BiCoWeights:
    kwargs = {}
    for name in _array_fields(BiCoWeights):
        key = f"fusion/{name}"
        if key not in tensors:
            raise ValueError(f"weights container is missing tensor {key!r}")
        kwargs[name] = tensors[key]
    return BiCoWeights(dims=dims, **kwargs)


def decoder_to_tensors(w: DecoderWeights) -> dict[str, np.ndarray]:
    out = {
        "decoder/mask_wq": np.asarray(w.mask_wq),
        "decoder/mask_wk": np.asarray(w.mask_wk),
        "decoder/w_part": np.asarray(w.w_part),
        "decoder/b_part": np.asarray(w.b_part),
    }
    for j, b in enumerate(w.blocks):
        for f in dataclasses.fields(b):
            out[f"decoder/block{j}/{f.name}"] = np.asarray(getattr(b, f.name))
    return out


def decoder_from_tensors(tensors: dict[str, np.ndarray], dims: DecoderDims) -> DecoderWeights:
    blocks = []
    for j in range(dims.blocks):
        kwargs = {}
        for f in dataclasses.fields(BlockWeights):
            key = f"decoder/block{j}/{f.name}"
            if key not in tensors:
                raise ValueError(f"weights container is missing tensor {key!r}")
            kwargs[f.name] = tensors[key]
        blocks.append(BlockWeights(**kwargs))
    for key in ("decoder/mask_wq", "decoder/mask_wk", "decoder/w_part", "decoder/b_part"):
        if key not in tensors:
            raise ValueError(f"weights container is missing tensor {key!r}")
    return DecoderWeights(
        dims=dims,
        blocks=blocks,
        mask_wq=tensors["decoder/mask_wq"],
        mask_wk=tensors["decoder/mask_wk"],
        w_part=tensors["decoder/w_part"],
        b_part=float(tensors["decoder/b_part"]),
    )


def _fusion_dims(cfg: RunConfig) -> FusionDims:
    return FusionDims(
        d_geo=cfg.d_geo, d_app=cfg.d_app, d_fused=cfg.d_fused, d_model=cfg.d_app,
        heads=cfg.heads, num_freqs=cfg.num_freqs, k=cfg.knn_k,
    )


def _decoder_dims(cfg: RunConfig) -> DecoderDims:
    return DecoderDims(
        num_partlets=cfg.num_partlets, d_text=cfg.d_text, d_fused=cfg.d_fused,
        heads=cfg.heads, blocks=cfg.decoder_blocks,
    )


def _load_stats(path: str) -> ClassStats:
    tensors = fileio.load_tensors(path)
    means = {
        name[len("mean/"):]: arr for name, arr in tensors.items() if name.startswith("mean/")
    }
    if "cov_inv" not in tensors or not means:
        raise ValueError("statistics container needs 'cov_inv' and at least one 'mean/<label>'")
    return ClassStats(means=means, cov_inv=tensors["cov_inv"], cov=tensors.get("cov", np.linalg.inv(tensors["cov_inv"])))


# --- commands ---------------------------------------------------------------


@click.group()
@click.option("--config", "config_path", envvar="PARTMATCH_CONFIG", type=click.Path(), default=None,
              help="Run configuration JSON (env: PARTMATCH_CONFIG).")
@click.pass_context
def main(ctx, config_path):
    """Part discovery, naming, evaluation, and review tooling."""
    try:
        ctx.obj = load_config(config_path) if config_path else RunConfig()
    except FileNotFoundError as exc:
        _fail(EXIT_ENV, f"config not found: {exc}")
    except (ValueError, json.JSONDecodeError) as exc:
        _fail(EXIT_SCHEMA, f"bad config: {exc}")


@main.command()
@click.argument("shape_file", type=click.Path())
@click.argument("weights_file", type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_obj
def fuse(cfg: RunConfig, shape_file, weights_file, output):
    """Fuse per-point geometry and appearance features for one shape."""
    try:
        shape = fileio.load_shape(shape_file)
        if "geo_features" not in shape or "app_features" not in shape:
            raise ValueError("shape file needs geo_features and app_features for fusion")
        weights = fusion_from_tensors(fileio.load_tensors(weights_file), _fusion_dims(cfg))
        fused = bico_forward(shape["points"], shape["geo_features"], shape["app_features"], weights)
    except FileNotFoundError as exc:
        _fail(EXIT_SCHEMA, f"missing input: {exc}")
    except (ValueError, json.JSONDecodeError) as exc:
        _fail(EXIT_SCHEMA, str(exc))
    fileio.save_tensors(output, {"fused": fused})
    click.echo(f"fused {fused.shape[0]} points -> {output}")


def _partlet_point_sets(mask_logits: np.ndarray, labeled: list[int]) -> tuple[dict[int, list[int]], int]:
    """Per-partlet point index lists via argmax over labeled partlets (p >= 0.5)."""
    n = mask_logits.shape[1]
    if not labeled:
        return {}, n
    probs = sigmoid(np.asarray(mask_logits, dtype=np.float64)[labeled])
    best = probs.argmax(axis=0)
    best_p = probs[best, np.arange(n)]
    sets: dict[int, list[int]] = {k: [] for k in labeled}
    unlabeled = 0
    for i in range(n):
        if best_p[i] >= 0.5:
            sets[labeled[best[i]]].append(i)
        else:
            unlabeled += 1
    return sets, unlabeled


@main.command()
@click.argument("shape_file", type=click.Path())
@click.argument("weights_file", type=click.Path())
@click.option("--mode", type=click.Choice(["closed", "open", "retrieve", "saliency", "kmeans"]), default="closed")
@click.option("--class-emb", type=click.Path(), default=None, help="Class label embedding file.")
@click.option("--part-emb", type=click.Path(), default=None, help="Part label embedding file.")
@click.option("--stats", "stats_file", type=click.Path(), default=None, help="Class statistics container.")
@click.option("--query", default=None, help="Part label to retrieve (mode=retrieve).")
@click.option("--top-m", type=int, default=8, help="Partlets to keep (mode=saliency).")
@click.option("--clusters", type=int, default=8, help="Cluster count (mode=kmeans).")
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_obj
def infer(cfg: RunConfig, shape_file, weights_file, mode, class_emb, part_emb, stats_file,
          query, top_m, clusters, output):
    """Decode partlets for one shape and name, retrieve, rank, or cluster them."""
    try:
        shape = fileio.load_shape(shape_file)
        tensors = fileio.load_tensors(weights_file)
        fw = fusion_from_tensors(tensors, _fusion_dims(cfg))
        dw = decoder_from_tensors(tensors, _decoder_dims(cfg))
        fused = bico_forward(shape["points"], shape["geo_features"], shape["app_features"], fw)
        init = init_partlets(cfg.seed, cfg.num_partlets, cfg.d_text)
        partlets = decode(init, fused, dw)

        if mode == "saliency":
            ranking = rank_by_saliency(partlets, top_m)
            doc = {"shape_id": shape["id"], "mode": "saliency", "ranking": ranking}
            Path(output).write_text(fileio.canonical_json(doc))
        elif mode == "kmeans":
            assign = kmeans_cluster(fused, clusters, seed=cfg.seed)
            doc = {"shape_id": shape["id"], "mode": "kmeans", "assignments": [int(a) for a in assign]}
            Path(output).write_text(fileio.canonical_json(doc))
        elif mode == "retrieve":
            if part_emb is None or query is None:
                raise ValueError("mode=retrieve needs --part-emb and --query")
            vocab = fileio.load_embeddings(part_emb)
            if query not in vocab:
                raise ValueError(f"query label {query!r} not in the embedding file")
            k, logits = mode3_retrieve(partlets, vocab[query])
            indices = [int(i) for i in np.where(sigmoid(logits) >= 0.5)[0]]
            doc = {"shape_id": shape["id"], "mode": "retrieve", "query": query,
                   "partlet_index": k, "point_indices": indices}
            Path(output).write_text(fileio.canonical_json(doc))
        else:
            if part_emb is None:
                raise ValueError(f"mode={mode} needs --part-emb")
            part_vocab = fileio.load_embeddings(part_emb)
            if mode == "closed":
                if class_emb is None or stats_file is None:
                    raise ValueError("mode=closed needs --class-emb and --stats")
                class_texts = fileio.load_embeddings(class_emb)
                stats = _load_stats(stats_file)
                if "global_proj" not in tensors:
                    raise ValueError("weights container is missing tensor 'global_proj'")
                z_global = global_embedding(fused, tensors["global_proj"])
                result = mode1_closed(
                    partlets, z_global, class_texts,
                    {label: part_vocab for label in class_texts}, stats,
                    tau=cfg.tau, alpha=cfg.conf_alpha, beta=cfg.conf_beta,
                )
            else:
                result = mode2_open(partlets, part_vocab, tau=cfg.tau)
            named = [p for p in result.predictions if p.label is not None]
            sets, unlabeled = _partlet_point_sets(partlets.mask_logits, [p.partlet_index for p in named])
            doc = {
                "shape_id": shape["id"],
                "category": result.category,
                "partlets": [
                    {
                        "name": p.label,
                        "conf_soft": p.conf_soft if p.conf_soft is not None else 0.0,
                        "conf_maha": p.conf_maha if p.conf_maha is not None else 0.0,
                        "conf_fused": p.conf_fused if p.conf_fused is not None else 0.0,
                        "mask_point_indices": sets.get(p.partlet_index, []),
                    }
                    for p in named
                ],
                "unlabeled_count": unlabeled,
            }
            fileio.save_prediction(output, doc)
    except FileNotFoundError as exc:
        _fail(EXIT_SCHEMA, f"missing input: {exc}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_SCHEMA, str(exc))
    click.echo(f"{mode} inference -> {output}")


@main.command(name="eval")
@click.argument("pred_files", nargs=-1, required=True, type=click.Path())
@click.option("--gt", "gt_files", multiple=True, required=True, type=click.Path(),
              help="Ground-truth shape files (repeatable).")
@click.option("--emb", "emb_file", required=True, type=click.Path(), help="Label embedding file.")
@click.option("-o", "--output", type=click.Path(), default=None, help="Write the table here instead of stdout.")
def eval_cmd(pred_files, gt_files, emb_file, output):
    """Score predictions: class-agnostic, relaxed, and strict label-aware mIoU."""
    try:
        emb = fileio.load_embeddings(emb_file)
        gt_by_id = {}
        for path in gt_files:
            shape = fileio.load_shape(path)
            if "gt_parts" not in shape:
                raise ValueError(f"{path} has no ground-truth parts")
            gt_by_id[shape["id"]] = LabeledPartition(
                [(p["label"], set(p["point_indices"])) for p in shape["gt_parts"]]
            )
        rows = []
        for path in pred_files:
            doc = fileio.load_prediction(path)
            if doc["shape_id"] not in gt_by_id:
                raise ValueError(f"no ground truth for shape {doc['shape_id']!r}")
            gt = gt_by_id[doc["shape_id"]]
            pred = LabeledPartition(
                [(p["name"], set(p["mask_point_indices"])) for p in doc["partlets"]
                 if p["mask_point_indices"]]
            )
            rows.append((
                doc["shape_id"],
                class_agnostic_miou(gt, pred),
                rla_miou(gt, pred, emb),
                la_miou(gt, pred),
            ))
    except FileNotFoundError as exc:
        _fail(EXIT_SCHEMA, f"missing input: {exc}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_SCHEMA, str(exc))
    lines = ["shape_id\tmiou\trla_miou\tla_miou"]
    for sid, m, r, l in rows:
        lines.append(f"{sid}\t{m:.6f}\t{r:.6f}\t{l:.6f}")
    means = [sum(r[i] for r in rows) / len(rows) for i in (1, 2, 3)]
    lines.append(f"MEAN\t{means[0]:.6f}\t{means[1]:.6f}\t{means[2]:.6f}")
    text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("vocab_file", type=click.Path())
@click.argument("decisions_file", type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path())
def ontology(vocab_file, decisions_file, output):
    """Build the canonical label map from a vocabulary and recorded adjudications."""
    try:
        with open(vocab_file, "r", encoding="utf-8") as fh:
            vocab_doc = json.load(fh)
        vocab = [VocabEntry(object_class=e["object_class"], part_label=e["part_label"],
                            count=int(e.get("count", 1)), source=e.get("source", ""))
                 for e in vocab_doc]
        decisions = [
            Adjudication(a=r["a"], b=r["b"], verdict=r["verdict"],
                         rationale=r.get("rationale", ""), source=r.get("source", "recorded"),
                         sim=r.get("sim"))
            for r in fileio.read_log(decisions_file)
        ]
    except FileNotFoundError as exc:
        _fail(EXIT_SCHEMA, f"missing input: {exc}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_SCHEMA, str(exc))
    try:
        cmap = apply_adjudications(vocab, decisions)
    except (ValueError, KeyError) as exc:
        _fail(EXIT_CONFLICT, str(exc))
    Path(output).write_text(fileio.canonical_json(
        {"mapping": cmap.mapping, "merged_counts": cmap.merged_counts, "log": cmap.log}
    ))
    click.echo(f"canonical map with {len(cmap.log)} aliases -> {output}")


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(), help="Append-only decision log.")
@click.option("--port", type=int, default=8400)
@click.option("--host", default="127.0.0.1")
@click.option("--canonical-map", "map_file", type=click.Path(), default=None,
              help="Canonical map JSON produced by the ontology command.")
@click.option("--vocab", "vocab_file", type=click.Path(), default=None,
              help="Vocabulary JSON for relabel validation.")
@click.pass_obj
def serve(cfg: RunConfig, log_path, port, host, map_file, vocab_file):
    """Host the annotation review service over HTTP."""
    from .ontology import CanonicalMap
    from .service import create_app

    cmap = None
    vocab = None
    try:
        if map_file:
            doc = json.loads(Path(map_file).read_text())
            cmap = CanonicalMap(mapping=doc["mapping"], merged_counts=doc.get("merged_counts", {}),
                                log=doc.get("log", []))
        if vocab_file:
            entries = json.loads(Path(vocab_file).read_text())
            vocab = {}
            for e in entries:
                vocab.setdefault(e["object_class"], []).append(e["part_label"])
    except FileNotFoundError as exc:
        _fail(EXIT_SCHEMA, f"missing input: {exc}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_SCHEMA, str(exc))
    # probe the port up front so a busy port is a clean environment error
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        _fail(EXIT_ENV, f"cannot bind {host}:{port}: {exc}")
    finally:
        probe.close()
    try:
        service = AnnotationService(log_path, canonical_map=cmap, vocab=vocab,
                                    lease_seconds=cfg.lease_seconds)
    except ValueError as exc:
        _fail(EXIT_CONFLICT, f"log replay failed: {exc}")
    import uvicorn

    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")


@main.command(name="selfcheck")
@click.option("--inject-fault", is_flag=True, hidden=True)
def selfcheck_cmd(inject_fault):
    """Re-verify core numerical invariants and print a per-property report."""
    lines, ok = selfcheck.run_all(inject_fault=inject_fault)
    for line in lines:
        click.echo(line)
    sys.exit(EXIT_OK if ok else 1)


if __name__ == "__main__":
    main()
