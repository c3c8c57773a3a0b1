"""
Aplicación principal: línea de comandos del modelo de productividad
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
