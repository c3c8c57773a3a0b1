"""
Exportación de tablas planas de resultados (CSV y Excel)
"""

import logging
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SHEET_NAME_MAX = 31


def write_tables(
    tables: Dict[str, pd.DataFrame], out_dir: str, stem: str, excel: bool = False
) -> List[Path]:
    """Una tabla CSV por entrada, `<stem>_<nombre>.csv`; opcionalmente un libro Excel"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, df in tables.items():
        path = out / f"{stem}_{name}.csv"
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        written.append(path)
    if excel:
        written.append(export_excel(tables, out / f"{stem}.xlsx"))
    logger.info(f"✓ {len(tables)} tablas escritas en {out}")
    return written


def export_excel(tables: Dict[str, pd.DataFrame], path: Path) -> Path:
    """Libro con una hoja por tabla, encabezado azul oscuro y primera fila congelada"""
    wb = Workbook()
    wb.remove(wb.active)

    header_fill = PatternFill(start_color="1F4E78", end_color="1F4E78", fill_type="solid")
    header_font = Font(bold=True, color="FFFFFF", size=11)
    border = Border(
        left=Side(style='thin'),
        right=Side(style='thin'),
        top=Side(style='thin'),
        bottom=Side(style='thin')
    )
    center_align = Alignment(horizontal="center", vertical="center", wrap_text=True)

    for name, df in tables.items():
        ws = wb.create_sheet(name[:SHEET_NAME_MAX])
        for col_idx, col_name in enumerate(df.columns, start=1):
            cell = ws.cell(row=1, column=col_idx, value=str(col_name))
            cell.fill = header_fill
            cell.font = header_font
            cell.border = border
            cell.alignment = center_align

        for row_idx, row in enumerate(df.itertuples(index=False), start=2):
            for col_idx, val in enumerate(row, start=1):
                if isinstance(val, (np.floating, float)):
                    val = None if not np.isfinite(val) else float(val)
                elif isinstance(val, np.integer):
                    val = int(val)
                elif isinstance(val, np.bool_):
                    val = bool(val)
                cell = ws.cell(row=row_idx, column=col_idx, value=val)
                cell.border = border
                if isinstance(val, float):
                    cell.number_format = '0.0000'

        for col_idx, col_name in enumerate(df.columns, start=1):
            ws.column_dimensions[get_column_letter(col_idx)].width = max(12, min(40, len(str(col_name)) + 4))
        ws.freeze_panes = "A2"

    wb.save(path)
    logger.info(f"✓ Excel exportado: {path}")
    return path
