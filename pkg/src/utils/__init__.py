"""
Utilidades generales del proyecto
"""

import json
import logging
import math
import os
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional

import numpy as np
from dotenv import dotenv_values, load_dotenv

SCHEMA_VERSION = 1
LOG_LEVEL_ENV = "PRODUCTIVIDAD_LOG_LEVEL"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(
    log_dir: Optional[str] = "logs",
    debug_dir: Optional[str] = "debug_logs",
    level: Optional[str] = None,
) -> logging.Logger:
    """
    Configura logging para el paquete `src`.

    Archivo INFO en log_dir, archivo DEBUG en debug_dir y consola con el nivel
    de PRODUCTIVIDAD_LOG_LEVEL (WARNING por defecto). Un directorio None omite
    su handler.
    """
    load_dotenv()
    console_level = (level or os.environ.get(LOG_LEVEL_ENV, "WARNING")).upper()

    logger = logging.getLogger("src")
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    stamp = datetime.now().strftime('%Y%m%d_%H%M%S')

    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(Path(log_dir) / f"modelo_{stamp}.log", encoding="utf-8")
        fh.setLevel(logging.INFO)
        fh.setFormatter(formatter)
        logger.addHandler(fh)

    if debug_dir is not None:
        Path(debug_dir).mkdir(parents=True, exist_ok=True)
        dh = logging.FileHandler(Path(debug_dir) / f"debug_{stamp}.log", encoding="utf-8")
        dh.setLevel(logging.DEBUG)
        dh.setFormatter(formatter)
        logger.addHandler(dh)

    ch = logging.StreamHandler()
    ch.setLevel(getattr(logging, console_level, logging.WARNING))
    ch.setFormatter(formatter)
    logger.addHandler(ch)

    return logger


def to_serializable(obj):
    """Convierte escalares y arreglos numpy, y NaN/inf a None, recursivamente"""
    if isinstance(obj, dict):
        return {str(k): to_serializable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_serializable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_serializable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def save_results_json(results_dict: dict, output_file: str) -> None:
    """Guarda resultados en JSON con schema_version"""
    payload = {"schema_version": SCHEMA_VERSION, **to_serializable(results_dict)}
    Path(output_file).parent.mkdir(parents=True, exist_ok=True)
    with open(output_file, 'w', encoding="utf-8") as f:
        json.dump(payload, f, indent=2, default=str, ensure_ascii=False)


def load_results_json(input_file: str) -> dict:
    """Carga resultados desde JSON"""
    with open(input_file, 'r', encoding="utf-8") as f:
        data = json.load(f)
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"schema_version no soportada en {input_file}: {version}")
    return data


def load_config_file(path: str) -> Dict[str, str]:
    """Lee un archivo de configuración plano clave = valor"""
    if not Path(path).exists():
        raise ValueError(f"Archivo de configuración no encontrado: {path}")
    values = dotenv_values(path)
    return {k.strip().lower(): (v or "").strip().strip('"') for k, v in values.items()}
