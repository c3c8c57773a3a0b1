"""
Cargador del dataset canónico de investigadores (CSV)
"""

import logging
import re
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import SchemaError, ValidacionError
from .model import Calibration, ContractState, ResearcherRecord, TimeAllocation

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ["id", "field", "M", "G", "D", "H", "F", "R", "EG"]
ANSWER_COLUMNS = [f"M_tilde_{j}" for j in range(1, 5)]
FEATURE_PATTERN = re.compile(r"^feature_(\d+)$")


class DataLoader:
    """Carga y valida el dataset: una fila por investigador"""

    def __init__(self, csv_path: str, cal: Optional[Calibration] = None):
        self.csv_path = csv_path
        self.cal = cal or Calibration()

        self.data: Optional[pd.DataFrame] = None
        self.records: Optional[List[ResearcherRecord]] = None
        self.feature_columns: List[str] = []

    @staticmethod
    def _to_float(series: pd.Series) -> pd.Series:
        """Convierte texto numérico a float soportando coma decimal."""
        if series.dtype.kind in "fi":
            return series.astype(float)
        return pd.to_numeric(
            series.astype(str).str.strip().replace({"": np.nan, "nan": np.nan}).str.replace(",", ".", regex=False),
            errors="coerce",
        )

    def load_all(self) -> bool:
        """Lee, valida y construye los registros. Retorna True si está completo."""
        try:
            logger.info(f"Cargando dataset desde: {self.csv_path}")
            df = pd.read_csv(self.csv_path, dtype={"id": str, "field": str}, keep_default_na=True)

            for col in REQUIRED_COLUMNS + ANSWER_COLUMNS:
                if col not in df.columns:
                    raise SchemaError(col)

            self.feature_columns = sorted(
                (c for c in df.columns if FEATURE_PATTERN.match(c)),
                key=lambda c: int(FEATURE_PATTERN.match(c).group(1)),
            )
            if not self.feature_columns:
                logger.warning("⚠ Dataset sin columnas feature_k: T = 0 para todos")

            for col in REQUIRED_COLUMNS[2:] + ANSWER_COLUMNS + self.feature_columns:
                df[col] = self._to_float(df[col])

            for col in REQUIRED_COLUMNS + self.feature_columns:
                missing = df[col].isna()
                if missing.any():
                    first = df.loc[missing, "id"].iloc[0]
                    raise ValidacionError(f"Columna '{col}' vacía para {int(missing.sum())} filas (primera: {first})")

            duplicated = df["id"].duplicated()
            if duplicated.any():
                raise ValidacionError(f"ids duplicados: {sorted(df.loc[duplicated, 'id'].unique())[:5]}")

            self.data = df
            self.records = [self._row_to_record(row) for row in df.itertuples(index=False)]

            n_zero = sum(1 for r in self.records if r.allocation.fundraising == 0)
            n_empty = int(df[ANSWER_COLUMNS].isna().sum().sum())
            logger.info(f"✓ Dataset: {len(self.records)} investigadores, {len(self.feature_columns)} features")
            logger.info(f"ℹ {n_zero} sin fundraising, {n_empty} respuestas WTP vacías")
            return True

        except Exception as e:
            logger.error(f"Error cargando dataset: {e}")
            raise

    def _row_to_record(self, row) -> ResearcherRecord:
        values = row._asdict()
        answers = tuple(
            None if pd.isna(values[c]) else float(values[c]) for c in ANSWER_COLUMNS
        )
        record = ResearcherRecord(
            id=str(values["id"]),
            field_label=str(values["field"]),
            contract=ContractState(float(values["M"]), float(values["G"]), float(values["D"])),
            allocation=TimeAllocation(float(values["R"]), float(values["F"]), float(values["H"])),
            expected_extra_funding=float(values["EG"]),
            wtp_answers=answers,
            features=tuple(float(values[c]) for c in self.feature_columns),
        )
        try:
            record.validate(self.cal)
        except ValidacionError as e:
            raise ValidacionError(f"[{record.id}] {e}") from e
        return record

    def get_features(self) -> np.ndarray:
        if self.data is None:
            raise ValidacionError("Dataset no cargado: llamar load_all()")
        return self.data[self.feature_columns].to_numpy(dtype=float)

    def with_type_index(self, T: Sequence[float]) -> List[ResearcherRecord]:
        """Registros con el índice de tipo asignado en orden de fila"""
        if self.records is None:
            raise ValidacionError("Dataset no cargado: llamar load_all()")
        if len(T) != len(self.records):
            raise ValidacionError(f"T tiene {len(T)} valores para {len(self.records)} registros")
        return [replace(r, type_index=float(t)) for r, t in zip(self.records, T)]


def records_to_frame(records: Sequence[ResearcherRecord]) -> pd.DataFrame:
    """DataFrame con el esquema canónico; celdas vacías para respuestas ausentes"""
    n_features = max((len(r.features) for r in records), default=0)
    rows = []
    for r in records:
        row = {
            "id": r.id,
            "field": r.field_label,
            "M": r.contract.salary,
            "G": r.contract.guaranteed_funding,
            "D": r.contract.duties,
            "H": r.allocation.total_hours,
            "F": r.allocation.fundraising,
            "R": r.allocation.research,
            "EG": r.expected_extra_funding,
        }
        for col, ans in zip(ANSWER_COLUMNS, r.wtp_answers):
            row[col] = np.nan if ans is None else ans
        for k in range(n_features):
            row[f"feature_{k + 1}"] = r.features[k]
        rows.append(row)
    columns = REQUIRED_COLUMNS + ANSWER_COLUMNS + [f"feature_{k + 1}" for k in range(n_features)]
    return pd.DataFrame(rows, columns=columns)


def write_dataset(records: Sequence[ResearcherRecord], path: str) -> Path:
    """Escribe el CSV canónico con 17 dígitos significativos"""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    records_to_frame(records).to_csv(out, index=False, float_format="%.17g", na_rep="")
    logger.info(f"✓ Dataset escrito: {out} ({len(records)} filas)")
    return out
