"""Config-driven pipeline stages behind the service endpoints.

Each run_* function takes plain config dicts (parsed JSON) plus any input
payloads and returns a dict of artifact name -> file content (str for text,
bytes for the parameter binary). All file names and content are
deterministic functions of the config, including its seed.
"""

from __future__ import annotations

import io
import json
import math

import numpy as np

from .betafit import beta_pdf, elicited_to_json_dict, fit_beta_mom
from .datasets import (
    DatasetManifest,
    DecisionRecord,
    load_images,
    load_tabular,
    read_records_csv,
    records_from_csv,
    records_to_csv_text,
    split,
)
from .diagnostics import (
    EvaluatedRecord,
    PointStatistic,
    auc_prediction,
    average_reports,
    ci_correct,
    point_prediction,
    report_csv_tables,
    report_json_dict,
    summarize,
)
from .errors import DataError, DomainError, SchemaError
from .netparams import param_shapes, params_from_bytes, params_to_bytes
from .netspec import NetworkSpec, spec_from_dict, spec_to_dict, residual_mlp_spec
from .rng import derive_subseed
from .sampling import mc_sample, sample_to_text
from .stats import DEFAULT_ENTROPY_BINS, distribution_entropy, point_entropy
from .synthetic import PanelConfig, generate, truth_to_csv_text
from .training import TrainConfig, train

MAX_SEED = 2**64


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv_text(rows) -> str:
    buf = io.StringIO()
    for row in rows:
        buf.write(",".join("" if v is None else str(v) for v in row))
        buf.write("\n")
    return buf.getvalue()


def _require(cfg: dict, section: str) -> dict:
    value = cfg.get(section)
    if not isinstance(value, dict):
        raise DomainError(f"config section {section!r} is required")
    return value


def _take(section: dict, name: str, allowed: set[str]) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise DomainError(f"unknown keys in config section {name!r}: {sorted(unknown)}")
    return section


def resolve_seed(cfg: dict) -> int:
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or not (0 <= seed < MAX_SEED):
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed


def _tmpfile_roundtrip(write, read):
    """Serialize through an in-memory buffer using file-based helpers."""
    buf = io.StringIO()
    write(buf)
    buf.seek(0)
    return read(buf)


def resolve_dataset(dataset_cfg: dict):
    """Load records per the config's dataset section.

    Forms: {"records_csv": text} inline, {"records": path} for the exact
    interchange CSV, {"tabular": {...}} or {"images": {...}} for raw
    sources. Returns (records, feature_shape, panel_size or None).
    """
    if not isinstance(dataset_cfg, dict) or not dataset_cfg:
        raise DomainError("config section 'dataset' is required")
    panel_size = dataset_cfg.get("panel_size")
    shape_cfg = dataset_cfg.get("feature_shape")

    if "records_csv" in dataset_cfg or "records" in dataset_cfg:
        shape = tuple(shape_cfg) if shape_cfg else None
        if "records_csv" in dataset_cfg:
            records = records_from_csv(io.StringIO(dataset_cfg["records_csv"]), shape)
        else:
            records = read_records_csv(dataset_cfg["records"], shape)
        feature_shape = records[0].features.shape
    elif "tabular" in dataset_cfg:
        t = _take(
            dataset_cfg["tabular"],
            "dataset.tabular",
            {"path", "feature_columns", "label_column", "agreement_column", "standardize"},
        )
        records, manifest = load_tabular(
            t["path"],
            t["feature_columns"],
            t["label_column"],
            t.get("agreement_column"),
            panel_size=panel_size,
            standardize=t.get("standardize", True),
        )
        feature_shape = manifest.feature_shape
    elif "images" in dataset_cfg:
        m = _take(
            dataset_cfg["images"],
            "dataset.images",
            {"directory", "labels", "side"},
        )
        records, manifest = load_images(
            m["directory"], m["labels"], side=m.get("side", 32), panel_size=panel_size
        )
        feature_shape = manifest.feature_shape
    else:
        raise DomainError(
            "dataset config needs one of: records_csv, records, tabular, images"
        )
    return records, tuple(feature_shape), panel_size


def resolve_network(cfg: dict, feature_shape: tuple[int, ...]) -> NetworkSpec:
    """Build the network from explicit layers or the residual-MLP shorthand."""
    net_cfg = cfg.get("network") or {}
    if "layers" in net_cfg:
        return spec_from_dict(
            {
                "input_shape": list(net_cfg.get("input_shape", feature_shape)),
                "layers": net_cfg["layers"],
            }
        )
    b = _take(net_cfg, "network", {"width", "blocks", "dropout", "input_shape"})
    base = residual_mlp_spec(
        int(math.prod(feature_shape)),
        width=b.get("width", 16),
        blocks=b.get("blocks", 2),
        dropout_rate=b.get("dropout", 0.2),
    )
    return NetworkSpec(base.layers, tuple(feature_shape))


def resolve_train_config(cfg: dict, seed: int) -> TrainConfig:
    t = _take(
        cfg.get("train") or {},
        "train",
        {"epochs", "base_lr", "lr_decay_start_epoch", "lr_decay_factor", "batch_size"},
    )
    if "epochs" not in t:
        raise DomainError("config section 'train' must set epochs")
    return TrainConfig(
        epochs=t["epochs"],
        base_lr=t.get("base_lr", 1e-3),
        lr_decay_start_epoch=t.get("lr_decay_start_epoch", 10),
        lr_decay_factor=t.get("lr_decay_factor", 0.99),
        batch_size=t.get("batch_size", 32),
        seed=seed,
    )


def run_synth(cfg: dict) -> dict:
    seed = resolve_seed(cfg)
    s = _take(
        _require(cfg, "synth"),
        "synth",
        {"n", "k", "expert_noise", "truth", "n_features", "constant_p"},
    )
    panel = PanelConfig(
        n=s.get("n", 0),
        k=s.get("k", 7),
        expert_noise=s.get("expert_noise", 0.1),
        seed=seed,
        truth=s.get("truth", "logistic"),
        n_features=s.get("n_features", 8),
        constant_p=s.get("constant_p", 0.5),
    )
    records, truth = generate(panel)

    ones = sum(r.label for r in records)
    manifest = DatasetManifest(
        source_kind="synthetic",
        record_count=len(records),
        class_counts={"0": len(records) - ones, "1": ones},
        feature_shape=(panel.n_features,),
        normalization={"kind": "none"},
        panel_size=panel.k,
    )
    return {
        "records.csv": records_to_csv_text(records),
        "manifest.json": _json_text(manifest.to_json_dict()),
        "truth.csv": truth_to_csv_text(truth),
    }


def run_train(cfg: dict) -> tuple[dict, float]:
    seed = resolve_seed(cfg)
    records, feature_shape, _ = resolve_dataset(_require(cfg, "dataset"))
    spec = resolve_network(cfg, feature_shape)
    tc = resolve_train_config(cfg, seed)
    params, history = train(spec, records, tc)

    hist_rows = [["epoch", "lr", "mean_loss"]] + [
        [e + 1, repr(lr), repr(loss)]
        for e, (lr, loss) in enumerate(zip(history.lrs, history.losses))
    ]
    artifacts = {
        "params.bin": params_to_bytes(params),
        "history.csv": _csv_text(hist_rows),
        "network.json": _json_text(spec_to_dict(spec)),
    }
    return artifacts, history.losses[-1]


def _elicit_input(cfg: dict, records, feature_shape):
    """Pick the input vector and its MC stream index."""
    e = cfg.get("elicit") or {}
    features = e.get("features")
    record_id = e.get("record_id")
    if features is not None:
        arr = np.asarray(features, dtype=np.float64)
        if feature_shape is not None:
            arr = arr.reshape(feature_shape)
        return arr, int(e.get("record_index", 0)), "inline"
    if record_id is None:
        raise DomainError("elicit config needs either features or record_id")
    if records is None:
        raise DomainError("elicit by record_id needs a dataset section")
    for idx, r in enumerate(records):
        if r.record_id == record_id:
            return r.features, idx, record_id
    raise DataError(f"record id {record_id!r} not found in dataset")


def run_elicit(cfg: dict, params_blob: bytes) -> tuple[dict, dict]:
    seed = resolve_seed(cfg)
    e = _take(
        cfg.get("elicit") or {},
        "elicit",
        {"T", "features", "record_id", "record_index"},
    )
    net_cfg = cfg.get("network") or {}
    if "layers" not in net_cfg:
        raise DomainError("elicit needs the trained network description (network.layers)")
    records = feature_shape = None
    if cfg.get("dataset"):
        records, feature_shape, _ = resolve_dataset(cfg["dataset"])
    spec = resolve_network(cfg, feature_shape or tuple(net_cfg.get("input_shape", ())))
    params = params_from_bytes(params_blob)
    _check_params_fit(spec, params)

    features, record_index, source = _elicit_input(cfg, records, spec.input_shape)
    T = e.get("T", 100)
    sample = mc_sample(spec, params, features, T=T, seed=seed, record_index=record_index)
    dist = fit_beta_mom(sample)
    summary = {
        "alpha": dist.alpha,
        "beta": dist.beta,
        "ci95": [dist.ci95[0], dist.ci95[1]],
        "degenerate": dist.degenerate,
        "input": source,
        "T": dist.T,
    }
    artifacts = {
        "elicited.json": _json_text(elicited_to_json_dict(dist)),
        "sample.txt": sample_to_text(sample),
    }
    return artifacts, summary


def _check_params_fit(spec: NetworkSpec, params) -> None:
    want = param_shapes(spec)
    got = [t.shape for t in params.tensors]
    if want != got:
        raise DataError("parameter file does not match the network description")


def _evaluate_one_split(spec, records, cfg, seed, split_index, eval_cfg, params=None):
    sub_seed = derive_subseed(seed, split_index)
    if params is None:
        test_fraction = eval_cfg.get("test_fraction", 0.2)
        train_recs, test_recs = split(records, test_fraction, seed, index=split_index)
        tc = resolve_train_config(cfg, sub_seed)
        params, _ = train(spec, train_recs, tc)
    else:
        test_recs = records  # pre-trained params: the whole dataset is the test set

    T = eval_cfg.get("T", 100)
    evaluated = []
    rows = []
    for idx, rec in enumerate(test_recs):
        sample = mc_sample(spec, params, rec.features, T=T, seed=sub_seed, record_index=idx)
        dist = fit_beta_mom(sample)
        e = EvaluatedRecord(rec.record_id, rec.label, sample, dist, rec.agreement)
        evaluated.append(e)
        outcome = ci_correct(e)
        rows.append(
            {
                "id": rec.record_id,
                "split": split_index,
                "label": rec.label,
                "agreement": rec.agreement,
                "alpha": dist.alpha,
                "beta": dist.beta,
                "degenerate": dist.degenerate,
                "mean": dist.sample_mean,
                "var": dist.sample_var,
                "ci95": [dist.ci95[0], dist.ci95[1]],
                "distribution_entropy": distribution_entropy(
                    sample, eval_cfg.get("entropy_bins", DEFAULT_ENTROPY_BINS)
                ),
                "point_entropy": point_entropy(dist.sample_mean),
                "ci_correct": outcome.correct,
                "ci_centered": outcome.centered,
                "predictions": {
                    "mean": point_prediction(e, PointStatistic.MEAN),
                    "mode": point_prediction(e, PointStatistic.MODE),
                    "median": point_prediction(e, PointStatistic.MEDIAN),
                    "auc": auc_prediction(e),
                },
            }
        )
    return evaluated, rows


def run_evaluate(cfg: dict, params_blob: bytes | None = None) -> tuple[dict, dict]:
    seed = resolve_seed(cfg)
    eval_cfg = _take(
        cfg.get("evaluate") or {},
        "evaluate",
        {
            "test_fraction",
            "splits",
            "T",
            "calibration_bins",
            "entropy_bins",
            "agreement",
            "panel_size",
        },
    )
    records, feature_shape, panel_size = resolve_dataset(_require(cfg, "dataset"))
    panel_size = eval_cfg.get("panel_size", panel_size) or 7
    spec = resolve_network(cfg, feature_shape)

    want_agreement = eval_cfg.get("agreement", "auto")
    have_agreement = all(r.agreement is not None for r in records)
    if want_agreement is True and not have_agreement:
        raise SchemaError("agreement analysis requested but records lack agreement counts")
    use_agreement = have_agreement if want_agreement == "auto" else bool(want_agreement)
    if not use_agreement:
        records = [DecisionRecord(r.record_id, r.features, r.label, None) for r in records]

    splits = eval_cfg.get("splits", 1)
    if not isinstance(splits, int) or splits < 1:
        raise DomainError(f"evaluate.splits must be a positive integer, got {splits!r}")
    params = None
    if params_blob is not None:
        if splits != 1:
            raise DomainError("evaluate with pre-trained params supports only splits=1")
        params = params_from_bytes(params_blob)
        _check_params_fit(spec, params)

    reports, all_rows = [], []
    for i in range(splits):
        evaluated, rows = _evaluate_one_split(spec, records, cfg, seed, i, eval_cfg, params)
        reports.append(
            summarize(
                evaluated,
                calibration_bins=eval_cfg.get("calibration_bins", 10),
                entropy_bins=eval_cfg.get("entropy_bins", DEFAULT_ENTROPY_BINS),
                panel_size=panel_size,
            )
        )
        all_rows.extend(rows)

    final = average_reports(reports) if len(reports) > 1 else reports[0]
    report_doc = {
        "diagnostics": report_json_dict(final),
        "records": all_rows,
        "network": spec_to_dict(spec),
        "seed": seed,
        "splits": splits,
        "T": eval_cfg.get("T", 100),
        "panel_size": panel_size if use_agreement else None,
        "entropy_bins": eval_cfg.get("entropy_bins", DEFAULT_ENTROPY_BINS),
        "dropout_note": "dropout layers sit after each residual shortcut addition",
    }
    tables = report_csv_tables(final)
    artifacts = {
        "report.json": _json_text(report_doc),
        "summary.csv": tables["summary"],
        "calibration.csv": tables["calibration"],
        "entropy.csv": tables["entropy"],
        "agreement.csv": tables["agreement"],
    }
    summary = {
        "accuracy_mean": final.accuracy_mean,
        "accuracy_ci95": final.accuracy_ci95,
        "f_score": final.f_score,
        "n_records": final.n_records,
        "splits": splits,
    }
    return artifacts, summary


def run_report(report_doc: dict, cfg: dict) -> dict:
    """Plot-data bundle from an evaluation report document."""
    r = _take(
        cfg.get("report") or {},
        "report",
        {"record_ids", "density_points"},
    )
    try:
        diagnostics = report_doc["diagnostics"]
        records = report_doc["records"]
    except (KeyError, TypeError):
        raise SchemaError("report document lacks diagnostics/records sections") from None

    ent_rows = [["histogram", "bin_lo", "bin_hi", "count"]]
    for name, hist in diagnostics["entropy_histograms"].items():
        for cell in hist:
            ent_rows.append([name, cell["bin_lo"], cell["bin_hi"], cell["count"]])

    cal_rows = [["bin_lo", "bin_hi", "mean_predicted", "frequency", "count"]]
    for cell in diagnostics["calibration"]:
        cal_rows.append(
            [cell["lo"], cell["hi"], cell["mean_predicted"], cell["frequency"], cell["count"]]
        )

    # violin source: raw per-record entropies grouped by opposing count
    agr_rows = [["opposing", "record_id", "distribution_entropy"]]
    panel_size = report_doc.get("panel_size")
    if panel_size:
        for row in records:
            if row.get("agreement") is None:
                continue
            agr_rows.append(
                [panel_size - row["agreement"], row["id"], repr(row["distribution_entropy"])]
            )

    by_id = {row["id"]: row for row in records}
    points = r.get("density_points", 512)
    if not isinstance(points, int) or points < 2:
        raise DomainError(f"report.density_points must be an integer >= 2, got {points!r}")
    density_rows = [["record_id", "x", "pdf"]]
    for rid in r.get("record_ids", []):
        row = by_id.get(rid)
        if row is None:
            raise DomainError(f"record id {rid!r} not found in the report")
        xs = np.linspace(0.0, 1.0, points)
        pdf = beta_pdf(row["alpha"], row["beta"], xs)
        for x, d in zip(xs, pdf):
            density_rows.append([rid, repr(float(x)), repr(float(d))])

    return {
        "entropy_histograms.csv": _csv_text(ent_rows),
        "calibration_curve.csv": _csv_text(cal_rows),
        "agreement_entropy.csv": _csv_text(agr_rows),
        "densities.csv": _csv_text(density_rows),
    }
