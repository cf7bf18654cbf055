import logging
from pathlib import Path
from typing import Literal

import pandas as pd

from src.exceptions import DataError
from src.metrics.schemas import OVERALL, REPORT_COLUMNS, ScenarioReport

logger = logging.getLogger(__name__)

ReportFormat = Literal["csv", "markdown"]
FLOAT_FORMAT = "%.4f"
GAP_COLUMNS = ["regime", "f1_A", "f1_B", "f1_C", "gap_C_B"]


def report_frame(reports: list[ScenarioReport]) -> pd.DataFrame:
    return pd.DataFrame([report.row() for report in reports], columns=REPORT_COLUMNS)


def _markdown(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(frame.columns) + " |"
    rule = "|" + "|".join(["---"] + ["---:"] * (len(frame.columns) - 1)) + "|"
    lines = [header, rule]
    for row in frame.itertuples(index=False):
        cells = [str(row[0])] + [FLOAT_FORMAT % value for value in row[1:]]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_report(reports: list[ScenarioReport], fmt: ReportFormat, path: str | Path) -> Path:
    """
    Writes the matrix table with columns scenario, ms_ds, simple_*, adapter_*,
    f1_A, f1_B, f1_C and four decimals. An empty list yields the header only.

    Raises:
    DataError: If the path cannot be written or the format is unknown.
    """
    path = Path(path)
    frame = report_frame(reports)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        elif fmt == "markdown":
            path.write_text(_markdown(frame), encoding="utf-8")
        else:
            raise DataError(f"unknown report format {fmt!r}")
    except OSError as error:
        raise DataError(f"cannot write report {path}: {error}")
    logger.info(f"wrote {len(reports)} report rows to {path}")
    return path


def parse_report(path: str | Path) -> list[ScenarioReport]:
    """Reads a CSV written by ``emit_report`` back into report rows."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"report {path} does not exist")
    frame = pd.read_csv(path, dtype={"scenario": str})
    missing = [column for column in REPORT_COLUMNS if column not in frame.columns]
    if missing:
        raise DataError(f"report {path} lacks columns {missing}")
    return [ScenarioReport(**record) for record in frame[REPORT_COLUMNS].to_dict("records")]


def write_scenario_detail(report: ScenarioReport, directory: str | Path) -> Path:
    """Per-scenario JSON with every column, the macro F1 values and per-class F1."""
    path = Path(directory) / f"{report.scenario}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return path


def ablation_gaps(results: dict[str, list[ScenarioReport]]) -> pd.DataFrame:
    """
    One row per regime with the overall A/B/C scores and f1_C - f1_B.

    Parameters:
    results (dict[str, list[ScenarioReport]]): Matrix rows keyed by regime name,
        each list ending with its overall row.
    """
    rows = []
    for regime, reports in results.items():
        overall = next((report for report in reports if report.scenario == OVERALL), None)
        if overall is None:
            raise DataError(f"regime {regime} has no {OVERALL} row")
        rows.append(
            {
                "regime": regime,
                "f1_A": overall.f1_A,
                "f1_B": overall.f1_B,
                "f1_C": overall.f1_C,
                "gap_C_B": overall.f1_C - overall.f1_B,
            }
        )
    return pd.DataFrame(rows, columns=GAP_COLUMNS)


def emit_ablation_gaps(results: dict[str, list[ScenarioReport]], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ablation_gaps(results).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def f1_table(class_names: list[str], per_class: dict[str, float], micro: float, macro: float) -> pd.DataFrame:
    """Per-class F1 rows followed by "micro" and "macro" rows, as printed by ``evaluate``."""
    rows = [{"class_name": name, "f1": per_class[name]} for name in class_names]
    rows += [{"class_name": "micro", "f1": micro}, {"class_name": "macro", "f1": macro}]
    return pd.DataFrame(rows, columns=["class_name", "f1"])

