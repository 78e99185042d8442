"""
Compare - Side-by-side table of results records for one scenario

Each record becomes one column of the table, in the order given. The
rows show the objective, its decomposition, sum(delta), the final mass
and the runtime, followed by the objective difference to the first record.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from trigopt.bench.records import ResultsRecord
from trigopt.errors import ConfigError

logger = logging.getLogger(__name__)

COMPARISON_FILE = "comparison.csv"
LABEL_WIDTH = 22
COLUMN_WIDTH = 18


@dataclass(frozen=True)
class ComparisonRow:
    """One quantity across every compared record."""

    quantity: str
    values: List[Optional[float]]


@dataclass(frozen=True)
class ComparisonTable:
    scenario: str
    labels: List[str]
    rows: List[ComparisonRow]

    def row(self, quantity: str) -> ComparisonRow:
        for row in self.rows:
            if row.quantity == quantity:
                return row
        raise KeyError(quantity)

    def format(self) -> str:
        """Fixed-width text rendering."""
        header = "".ljust(LABEL_WIDTH) + "".join(label.rjust(COLUMN_WIDTH) for label in self.labels)
        lines = [f"Scenario: {self.scenario}", header, "-" * len(header)]
        for row in self.rows:
            cells = "".join(_format_value(value).rjust(COLUMN_WIDTH) for value in row.values)
            lines.append(row.quantity.ljust(LABEL_WIDTH) + cells)
        return "\n".join(lines)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["quantity"] + self.labels)
            writer.writeheader()
            for row in self.rows:
                entry = {"quantity": row.quantity}
                for label, value in zip(self.labels, row.values):
                    entry[label] = "" if value is None else repr(value)
                writer.writerow(entry)
        return path


def _format_value(value: Optional[float]) -> str:
    if value is None:
        return "-"
    return f"{value:.2f}"


def _unique_labels(records: Sequence[ResultsRecord]) -> List[str]:
    seen: Dict[str, int] = {}
    labels = []
    for record in records:
        seen[record.label] = seen.get(record.label, 0) + 1
        count = seen[record.label]
        labels.append(record.label if count == 1 else f"{record.label}#{count}")
    return labels


def compare(records: Sequence[ResultsRecord]) -> ComparisonTable:
    """
    Build the comparison table.

    Args:
        records: At least two records of the same scenario

    Returns:
        ComparisonTable with one column per record

    Raises:
        ConfigError: On fewer than two records or mixed scenarios
    """
    records = list(records)
    if len(records) < 2:
        raise ConfigError(f"Comparison needs at least two records, got {len(records)}")
    scenarios = sorted({record.scenario for record in records})
    if len(scenarios) > 1:
        raise ConfigError(f"Records mix scenarios: {', '.join(scenarios)}")

    term_labels = sorted({label for record in records for label in record.objective_terms})
    reference = records[0].objective

    rows = [ComparisonRow("objective", [record.objective for record in records])]
    for label in term_labels:
        rows.append(ComparisonRow(label, [record.objective_terms.get(label) for record in records]))
    rows.append(ComparisonRow("sum delta", [record.indicator_total for record in records]))
    if scenarios[0] == "pdg":
        rows.append(ComparisonRow("final mass [kg]", [record.final_mass for record in records]))
    rows.append(ComparisonRow("runtime [s]", [record.runtime for record in records]))
    rows.append(
        ComparisonRow(
            "objective delta",
            [
                None if reference is None or record.objective is None else record.objective - reference
                for record in records
            ],
        )
    )
    logger.debug("Compared %d %s records", len(records), scenarios[0])
    return ComparisonTable(scenario=scenarios[0], labels=_unique_labels(records), rows=rows)
