from pathlib import Path

import pandas as pd
import pytest
import yaml
from typer.testing import CliRunner

from interfaces.cli import app
from tests.conftest import CONFIG_DIR

runner = CliRunner()

BINARY_CHAIN = ["prepare", "augment", "train", "predict", "evaluate", "analyze"]
COMPARED_SUFFIXES = {".tsv", ".yaml", ".jsonl", ".md"}


def _invoke(command, config, run_dir, *extra):
    return runner.invoke(app, [command, "--config", str(config), "--run-dir", str(run_dir), *extra])


def _ok(result):
    assert result.exit_code == 0, result.output
    return result


def _config(tmp_path, base, name="run.yaml", **sections):
    """Kopia konfiguracji z absolutnymi ścieżkami i nadpisanymi sekcjami."""
    raw = yaml.safe_load((CONFIG_DIR / base).read_text(encoding="utf-8"))
    paths = raw["paths"]
    paths["inputs"] = {lang: str((CONFIG_DIR / p).resolve()) for lang, p in paths["inputs"].items()}
    for key in ("commonsense", "lexicon"):
        if paths.get(key):
            paths[key] = str((CONFIG_DIR / paths[key]).resolve())
    paths["run_dir"] = str(tmp_path / "runs" / "default")
    for section, values in sections.items():
        if isinstance(values, dict):
            raw.setdefault(section, {}).update(values)
        else:
            raw[section] = values
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


def _artifacts(root: Path):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file() and p.suffix in COMPARED_SUFFIXES
    }


def test_binary_chain_is_reproducible(tmp_path):
    """Dwa przebiegi z tym samym seedem dają bajtowo identyczne artefakty."""
    config = CONFIG_DIR / "toy_binary.yaml"
    for name in ("a", "b"):
        for command in BINARY_CHAIN:
            _ok(_invoke(command, config, tmp_path / name))

    first, second = _artifacts(tmp_path / "a"), _artifacts(tmp_path / "b")
    assert "train/trace.jsonl" in first
    assert "analyze/ablation.tsv" in first
    assert first == second


def test_binary_chain_artifacts(tmp_path):
    config = CONFIG_DIR / "toy_binary.yaml"
    run = tmp_path / "run"
    for command in BINARY_CHAIN[:4]:
        _ok(_invoke(command, config, run))

    split = pd.read_csv(run / "prepare" / "split.tsv", sep="\t", dtype=str, keep_default_na=False)
    dev = split[split["split"] == "dev"]
    val = split[split["split"] == "val"]
    assert len(dev) == 24
    assert len(val) == 56
    # wzorzec złożony trafia wyłącznie do val
    assert not dev["text"].str.startswith("I use ").any()

    nlpaug = pd.read_csv(run / "augment" / "nlpaug.tsv", sep="\t", dtype=str, keep_default_na=False)
    assert len(nlpaug) == len(dev) + (dev["label"] == "1").sum()
    assert (run / "augment" / "translated_fr.tsv").exists()
    assert (run / "augment" / "translated_it.tsv").exists()

    trace = (run / "train" / "trace.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(trace) == 2
    assert all('"status":"completed"' in line for line in trace)

    predictions = pd.read_csv(run / "predict" / "predictions.tsv", sep="\t", dtype=str)
    assert predictions["id"].tolist() == val["id"].tolist()
    assert set(predictions["prediction"]) <= {"0", "1"}

    _ok(_invoke("evaluate", config, run))
    metrics = (run / "evaluate" / "metrics_en.tsv").read_text(encoding="utf-8").splitlines()
    assert metrics[0] == "language\trecall\tprecision\tf1"
    assert metrics[1].startswith("English\t")
    assert (run / "evaluate" / "pattern_errors.tsv").exists()
    assert not (run / "evaluate" / "global.tsv").exists()


def test_missing_upstream_artifact_exits_with_config_error(tmp_path):
    result = _invoke("train", CONFIG_DIR / "toy_binary.yaml", tmp_path / "run")
    assert result.exit_code == 2
    assert "prepare" in result.output


def test_existing_artifacts_need_overwrite(tmp_path):
    """Ponowne uruchomienie polecenia nie nadpisuje artefaktów bez --overwrite."""
    config = CONFIG_DIR / "toy_binary.yaml"
    _ok(_invoke("prepare", config, tmp_path / "run"))
    assert _invoke("prepare", config, tmp_path / "run").exit_code == 2
    _ok(_invoke("prepare", config, tmp_path / "run", "--overwrite"))


def test_infeasible_split_exits_with_data_error(tmp_path):
    config = _config(tmp_path, "toy_binary.yaml", split={"dev_fraction": 0.9})
    result = _invoke("prepare", config, tmp_path / "run")
    assert result.exit_code == 3
    assert "split.dev_fraction" in result.output
    assert not (tmp_path / "run" / "prepare").exists()


def test_invalid_config_exits_before_any_work(tmp_path):
    config = _config(tmp_path, "toy_binary.yaml", strategy="three_stage")
    result = _invoke("prepare", config, tmp_path / "run")
    assert result.exit_code == 2
    assert "three_stage" in result.output
    assert not (tmp_path / "run").exists()


def test_identity_translation_is_fully_deduplicated(tmp_path):
    """Plik 'francuski' równy angielskiemu po tłumaczeniu identycznościowym znika w całości."""
    config = _config(
        tmp_path, "toy_binary.yaml",
        paths={"inputs": {
            "en": str((CONFIG_DIR / "../data/toy/task1_en.tsv").resolve()),
            "fr": str((CONFIG_DIR / "../data/toy/task1_en.tsv").resolve()),
        }},
        augment={"translate_from": ["fr"]},
        providers={"translator": "identity"},
    )
    run = tmp_path / "run"
    _ok(_invoke("prepare", config, run))
    result = _ok(_invoke("augment", config, run))
    assert "dedupe rate 100.00%" in result.output
    lines = (run / "augment" / "translated_fr.tsv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1


def test_missing_translator_credentials_exit_with_provider_error(tmp_path, monkeypatch):
    monkeypatch.delenv("TAXACC_GOOGLE_API_KEY", raising=False)
    monkeypatch.delenv("GOOGLE_TRANSLATE_API_KEY", raising=False)
    config = _config(tmp_path, "toy_binary.yaml", providers={"translator": "google"})
    run = tmp_path / "run"
    _ok(_invoke("prepare", config, run))
    result = _invoke("augment", config, run)
    assert result.exit_code == 4
    assert not (run / "augment").exists()


def test_tfidf_baseline_chain(tmp_path):
    config = CONFIG_DIR / "toy_binary.yaml"
    run = tmp_path / "run"
    for command in ("prepare", "train", "predict", "evaluate"):
        _ok(_invoke(command, config, run, "--strategy", "tfidf_svm"))
    assert (run / "train" / "model.bin").exists()
    assert not (run / "train" / "plan.yaml").exists()
    assert (run / "evaluate" / "metrics_en.md").read_text(encoding="utf-8").startswith("| language")


def _baseline_runs(tmp_path):
    config = _config(
        tmp_path, "toy_binary.yaml", strategy="tfidf_svm",
        split={"complex_patterns": []}, augment={"translate_from": []},
    )
    runs = {}
    for language in ("en", "fr", "it"):
        runs[language] = tmp_path / f"run_{language}"
        for command in ("prepare", "train", "predict"):
            _ok(_invoke(command, config, runs[language], "--language", language))
    return config, runs


def test_evaluate_across_languages_writes_global_score(tmp_path):
    """Z przebiegami fr i it ewaluacja zapisuje wynik globalny."""
    config, runs = _baseline_runs(tmp_path)
    _ok(_invoke("evaluate", config, runs["en"], "--with-run", str(runs["fr"]), "--with-run", str(runs["it"])))
    metrics = pd.read_csv(runs["en"] / "evaluate" / "metrics_en.tsv", sep="\t", dtype=str)
    assert metrics["language"].tolist() == ["English", "French", "Italian", "Average"]
    global_lines = (runs["en"] / "evaluate" / "global.tsv").read_text(encoding="utf-8").splitlines()
    assert global_lines[0] == "metric\tglobal"
    assert global_lines[1].startswith("f1\t")

    duplicate = _invoke("evaluate", config, runs["fr"], "--with-run", str(runs["fr"]))
    assert duplicate.exit_code == 2


def test_metrics_report_is_named_after_run_language(tmp_path):
    config, runs = _baseline_runs(tmp_path)
    _ok(_invoke("evaluate", config, runs["it"], "--language", "it"))
    out = runs["it"] / "evaluate"
    assert (out / "metrics_it.tsv").read_text(encoding="utf-8").splitlines()[1].startswith("Italian\t")
    assert (out / "metrics_it_plot.tsv").exists()
    assert not (out / "metrics.tsv").exists()
    assert not (out / "metrics_en.tsv").exists()


def test_misaligned_predictions_exit_with_data_error(tmp_path):
    config, runs = _baseline_runs(tmp_path)
    path = runs["it"] / "predict" / "predictions.tsv"
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    result = _invoke("evaluate", config, runs["it"])
    assert result.exit_code == 3
    assert "predictions" in result.output


def test_likert_chain_and_sweep(tmp_path):
    config = CONFIG_DIR / "toy_likert.yaml"
    run = tmp_path / "run"
    for command in ("prepare", "train", "predict", "evaluate", "sweep"):
        _ok(_invoke(command, config, run))

    predictions = pd.read_csv(run / "predict" / "predictions.tsv", sep="\t")
    assert len(predictions) == 35
    metrics = (run / "evaluate" / "metrics_en.tsv").read_text(encoding="utf-8").splitlines()
    assert metrics[0] == "language\trho"
    sweep = pd.read_csv(run / "sweep" / "regressor_sweep.tsv", sep="\t", dtype=str)
    assert list(sweep.columns) == ["language", "knn", "linear_svr", "ols", "svr", "tree"]
    assert not (run / "evaluate" / "pattern_errors.tsv").exists()


@pytest.mark.parametrize("command", ["augment", "analyze"])
def test_binary_only_commands_reject_likert_runs(tmp_path, command):
    result = _invoke(command, CONFIG_DIR / "toy_likert.yaml", tmp_path / "run")
    assert result.exit_code == 2


def test_sweep_rejects_binary_runs(tmp_path):
    assert _invoke("sweep", CONFIG_DIR / "toy_binary.yaml", tmp_path / "run").exit_code == 2
