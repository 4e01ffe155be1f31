"""Training-set construction for the two denoising tasks.

Multiple-removal examples pair a two-channel input (free-surface shot panel
plus the convolutional multiple estimate for the same shot) with the
ghosted absorbing-boundary panel as target. Deblending examples pair a
blended two-source record with the left-source-only record.

Gathers are stored as SGTH files; the JSON manifest lists per-example file
paths, patch origins, normalization scales, provenance and split
assignment. Test examples come only from models absent in train.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..blending import BlendSpec, shift_gather
from ..errors import ParameterError
from ..sgth import load_gather, save_gather
from ..srme import PrestackVolume, predict_multiples
from ..velocity import VelocityModel
from ..wavesim import BoundarySpec, ShotGather, SurveyGeometry, Wavelet, apply_ghost, simulate
from .normalize import compute_norm
from .patches import patch_origins

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ExampleRecord:
    input_paths: tuple[str, ...]
    target_path: str
    norm_scale: float
    model_id: str
    shot_id: int
    origin: tuple[int, int]
    patch: tuple[int, int]
    split: str
    meta: dict = field(default_factory=dict)


@dataclass
class DatasetManifest:
    task: str                # "srme" or "deblend"
    seed: int
    patch: tuple[int, int]
    stride: tuple[int, int]
    examples: list[ExampleRecord]
    root: str = ""           # directory holding the SGTH files (set on save/load)

    def split_examples(self, split: str) -> list[ExampleRecord]:
        return [e for e in self.examples if e.split == split]

    def validate_splits(self) -> None:
        """Model ids appearing in test must not appear in train."""
        train_models = {e.model_id for e in self.examples if e.split == "train"}
        test_models = {e.model_id for e in self.examples if e.split == "test"}
        overlap = train_models & test_models
        if overlap:
            raise ParameterError(f"test examples share model ids with train: {sorted(overlap)}")

    def save(self, dirpath) -> Path:
        d = Path(dirpath)
        d.mkdir(parents=True, exist_ok=True)
        payload = {
            "task": self.task,
            "seed": self.seed,
            "patch": list(self.patch),
            "stride": list(self.stride),
            "examples": [self._rec_dict(e) for e in self.examples],
        }
        tmp = d / (MANIFEST_NAME + ".tmp")
        tmp.write_text(json.dumps(payload, indent=1, sort_keys=True))
        final = d / MANIFEST_NAME
        os.replace(tmp, final)
        self.root = str(d)
        return final

    @staticmethod
    def _rec_dict(e: ExampleRecord) -> dict:
        d = asdict(e)
        d["input_paths"] = list(e.input_paths)
        d["origin"] = list(e.origin)
        d["patch"] = list(e.patch)
        return d

    @classmethod
    def load(cls, dirpath) -> "DatasetManifest":
        d = Path(dirpath)
        payload = json.loads((d / MANIFEST_NAME).read_text())
        examples = [ExampleRecord(
            input_paths=tuple(r["input_paths"]), target_path=r["target_path"],
            norm_scale=r["norm_scale"], model_id=r["model_id"], shot_id=r["shot_id"],
            origin=tuple(r["origin"]), patch=tuple(r["patch"]), split=r["split"],
            meta=r.get("meta", {})) for r in payload["examples"]]
        return cls(task=payload["task"], seed=payload["seed"],
                   patch=tuple(payload["patch"]), stride=tuple(payload["stride"]),
                   examples=examples, root=str(d))


def load_example(manifest: DatasetManifest, rec: ExampleRecord,
                 normalized: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Materialize one example: (input (C,h,w), target (1,h,w)) float32."""
    root = Path(manifest.root)
    r, c = rec.origin
    h, w = rec.patch
    chans = [load_gather(root / p).data[r:r + h, c:c + w] for p in rec.input_paths]
    tgt = load_gather(root / rec.target_path).data[r:r + h, c:c + w]
    x = np.stack(chans).astype(np.float32)
    y = tgt[None].astype(np.float32)
    if normalized:
        from .normalize import NormRecord
        nr = NormRecord(scale=rec.norm_scale)
        x = nr.forward(x).astype(np.float32)
        y = nr.forward(y).astype(np.float32)
    return x, y


def _check_split(split) -> tuple[float, float, float]:
    tr, va, te = split
    if abs(tr + va + te - 1.0) > 1e-9 or min(tr, va, te) < 0:
        raise ParameterError(f"split fractions must be >= 0 and sum to 1, got {split}")
    return tr, va, te


def _select_shot_indices(n_src: int, n_shots: int) -> list[int]:
    if n_shots > n_src:
        raise ParameterError(f"n_shots_per_model={n_shots} exceeds source count {n_src}")
    idx = np.unique(np.round(np.linspace(0, n_src - 1, n_shots)).astype(int))
    if idx.size != n_shots:
        raise ParameterError(f"cannot space {n_shots} shots over {n_src} sources evenly")
    return [int(i) for i in idx]


def _patch_grid(nt: int, nrec: int, patch, stride):
    rows = patch_origins(nt, patch[0], stride[0])
    cols = patch_origins(nrec, patch[1], stride[1])
    return [(r, c) for r in rows for c in cols]


def build_srme_dataset(models: list[VelocityModel], geom: SurveyGeometry,
                       wavelet: Wavelet, n_shots_per_model: int,
                       patch_hw: tuple[int, int], seed: int, out_dir,
                       stride_hw: tuple[int, int] | None = None,
                       split=(0.7, 0.15, 0.15), sponge: BoundarySpec | None = None
                       ) -> DatasetManifest:
    """Simulate every selected shot under both top boundaries and emit
    two-channel examples (free-surface panel, multiple estimate) with the
    ghosted absorbing panel as target.

    The shot set of each model doubles as the surface aperture for the
    multiple prediction, so sources must sit on the receiver grid.
    """
    if len(models) < 2:
        raise ParameterError("need at least 2 models so a held-out-model test split exists")
    tr, va, te = _check_split(split)
    stride_hw = patch_hw if stride_hw is None else stride_hw
    bc_fs = BoundarySpec(top="free_surface") if sponge is None else \
        BoundarySpec(top="free_surface", sponge_cells=sponge.sponge_cells,
                     sponge_strength=sponge.sponge_strength)
    bc_ab = BoundarySpec(top="absorbing", sponge_cells=bc_fs.sponge_cells,
                         sponge_strength=bc_fs.sponge_strength)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    n_test_models = max(1, round(len(models) * te)) if te > 0 else 0
    test_model_ids = {f"m{i:02d}" for i in range(len(models) - n_test_models, len(models))}

    shot_idx = _select_shot_indices(geom.src_x.size, n_shots_per_model)
    grid = _patch_grid(geom.nt, geom.nrec, patch_hw, stride_hw)

    records: list[ExampleRecord] = []
    pool = []  # non-test examples, split train/val after collection
    for mi, model in enumerate(models):
        mid = f"m{mi:02d}"
        fs_gathers = [simulate(model, geom, wavelet, bc_fs, [(s, 0.0)]) for s in shot_idx]
        vol = PrestackVolume(gathers=tuple(fs_gathers))
        for k, s in enumerate(shot_idx):
            pm = fs_gathers[k]
            mp = predict_multiples(vol, k, advance_s=wavelet.t0)
            p_only = simulate(model, geom, wavelet, bc_ab, [(s, 0.0)])
            tg = apply_ghost(p_only, geom.src_z, geom.rec_z)
            names = {}
            for kind, g in (("pm", pm), ("mp", mp), ("tg", tg)):
                name = f"{mid}_s{s:03d}_{kind}.sgth"
                save_gather(g, out / name)
                names[kind] = name
            for (r, c) in grid:
                norm = compute_norm(pm.data[r:r + patch_hw[0], c:c + patch_hw[1]])
                rec = ExampleRecord(
                    input_paths=(names["pm"], names["mp"]), target_path=names["tg"],
                    norm_scale=norm.scale, model_id=mid, shot_id=s,
                    origin=(r, c), patch=patch_hw, split="test", meta={})
                if mid in test_model_ids:
                    records.append(rec)
                else:
                    pool.append(rec)

    rng = np.random.default_rng(np.random.SeedSequence((seed, len(pool))))
    order = rng.permutation(len(pool))
    n_val = round(len(pool) * va / (tr + va)) if (tr + va) > 0 else 0
    val_set = set(order[:n_val].tolist())
    for i, rec in enumerate(pool):
        records.append(replace(rec, split="val" if i in val_set else "train"))

    manifest = DatasetManifest(task="srme", seed=seed, patch=patch_hw,
                               stride=stride_hw, examples=records)
    manifest.validate_splits()
    manifest.save(out)
    return manifest


def build_deblend_dataset(models: list[VelocityModel], geom: SurveyGeometry,
                          wavelet: Wavelet, blend_spec: BlendSpec, n_pairs: int,
                          patch_hw: tuple[int, int], seed: int, out_dir,
                          stride_hw: tuple[int, int] | None = None,
                          split=(0.8, 0.1, 0.1),
                          bc: BoundarySpec | None = None) -> DatasetManifest:
    """Blended-pair dataset: input = left + dithered right source, target =
    left source only. Single-source wavefields are simulated once per
    (model, source) and reused across pairs; each pair draws its own source
    pair and dither from a per-pair child seed.
    """
    if len(models) < 2:
        raise ParameterError("need at least 2 models so a held-out-model test split exists")
    tr, va, te = _check_split(split)
    stride_hw = patch_hw if stride_hw is None else stride_hw
    if bc is None:
        bc = BoundarySpec(top="free_surface")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    xs = geom.src_x
    order_x = np.argsort(xs)
    half = xs.size // 2
    left_pool = [int(i) for i in order_x[:half]]
    right_pool = [int(i) for i in order_x[half:]]
    if not left_pool or not right_pool:
        raise ParameterError("geometry needs sources on both halves of the spread")

    n_test_models = max(1, round(len(models) * te)) if te > 0 else 0
    test_models = list(range(len(models) - n_test_models, len(models)))
    train_models = list(range(len(models) - n_test_models))

    n_test = round(n_pairs * te)
    n_val = round(n_pairs * va)

    cache: dict[tuple[int, int], ShotGather] = {}

    def sim(mi: int, src: int) -> ShotGather:
        key = (mi, src)
        if key not in cache:
            cache[key] = simulate(models[mi], geom, wavelet, bc, [(src, 0.0)])
        return cache[key]

    children = np.random.SeedSequence(seed).spawn(n_pairs)
    records: list[ExampleRecord] = []
    grid = _patch_grid(geom.nt, geom.nrec, patch_hw, stride_hw)

    for p in range(n_pairs):
        if p < n_pairs - n_test - n_val:
            split_name, model_set = "train", train_models
        elif p < n_pairs - n_test:
            split_name, model_set = "val", train_models
        else:
            split_name, model_set = "test", test_models
        mi = model_set[p % len(model_set)]
        mid = f"m{mi:02d}"
        child_seed = int(children[p].generate_state(1)[0])
        rng = np.random.default_rng(children[p])
        li = left_pool[int(rng.integers(len(left_pool)))]
        ri = right_pool[int(rng.integers(len(right_pool)))]
        pair_spec = BlendSpec(dither_max=blend_spec.dither_max, seed=child_seed,
                              mode="superpose")
        tau = pair_spec.draw_dither(geom.dt)

        target = sim(mi, li)
        noise = sim(mi, ri)
        mixed = target.data.astype(np.float64) + shift_gather(
            noise.data.astype(np.float64), int(round(tau / geom.dt)))
        blended = target.with_data(mixed.astype(np.float32), tag="blended")

        in_name = f"{mid}_p{p:04d}_in.sgth"
        tg_name = f"{mid}_p{p:04d}_tg.sgth"
        save_gather(blended, out / in_name)
        save_gather(target, out / tg_name)
        sidecar = {"dither_s": tau, "left_src_x": float(xs[li]),
                   "right_src_x": float(xs[ri]), "seed": child_seed}
        (out / f"{mid}_p{p:04d}_meta.json").write_text(json.dumps(sidecar, indent=2))

        for (r, c) in grid:
            norm = compute_norm(blended.data[r:r + patch_hw[0], c:c + patch_hw[1]])
            records.append(ExampleRecord(
                input_paths=(in_name,), target_path=tg_name, norm_scale=norm.scale,
                model_id=mid, shot_id=p, origin=(r, c), patch=patch_hw,
                split=split_name, meta=sidecar))

    manifest = DatasetManifest(task="deblend", seed=seed, patch=patch_hw,
                               stride=stride_hw, examples=records)
    manifest.validate_splits()
    manifest.save(out)
    return manifest
