"""EstratoDoE: diseños de superficie de respuesta multiestrato.

Usage:
  main.py construct --config=<yaml> [--starts=<n>] [--seed=<s>] [--jobs=<j>] [--out=<dir>] [--json-log]
  main.py evaluate anova --config=<yaml> --design=<csv> [--out=<dir>] [--json-log]
  main.py evaluate compare --config=<yaml> --design=<csv> [--ref=<csv>] [--eta-grid=<spec>] [--out=<dir>] [--json-log]
  main.py evaluate parse <formula>
  main.py (-h | --help)

Opciones:
  -h --help          Muestra esta ayuda.
  --config=<yaml>    Archivo YAML del problema.
  --design=<csv>     Diseño a evaluar (columnas de unidades y factores).
  --ref=<csv>        Diseño de referencia [por defecto: evaluation.reference].
  --eta-grid=<spec>  "1,10,100" (rejilla completa) o "1:1;100:1" (puntos explícitos).
  --starts=<n>       Número de arranques aleatorios.
  --seed=<s>         Semilla maestra.
  --jobs=<j>         Procesos en paralelo (-1 = todos; por defecto ESTRATO_JOBS).
  --out=<dir>        Directorio de salida [por defecto: out/<nombre>].
  --json-log         Escribe además eventos JSONL en ESTRATO_LOG_DIR.

Códigos de salida:
  0  éxito
  2  error de configuración, fórmula, estructura, modelo o criterio
  3  no se encontró diseño inicial factible
  4  dimensiones del diseño distintas de la estructura
"""
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
from docopt import docopt

from app.core.logging import JsonLinesHandler, configure_logging
from app.core.resources import EXIT_CONFIG_ERROR, EXIT_OK
from app.core.settings import AppSettings, get_settings
from app.controllers.main_controller import RunOutput, exit_code_for, get_design_controller
from app.models.errors import EstratoError, FormulaSyntaxError


def _enable_json_log() -> None:
    logger = configure_logging()
    if any(isinstance(h, JsonLinesHandler) for h in logger.handlers):
        return
    base = Path(get_settings().value(AppSettings.KEY_LOG_DIR))
    logger.addHandler(JsonLinesHandler(base / "estrato_events.jsonl"))


def _int_or_none(value: Optional[str]) -> Optional[int]:
    return int(value) if value is not None else None


def _print_output(output: RunOutput) -> None:
    if output.text:
        print(output.text)
    for name, frame in output.tables.items():
        print(f"\n== {name} ==")
        with pd.option_context("display.max_rows", None, "display.width", 160):
            print(frame.to_string(index=False, float_format=lambda v: f"{v:.6g}"))
    for path in output.files:
        print(f"escrito: {path}")


def run(args: Dict[str, Any]) -> int:
    """Ejecuta la orden ya analizada por docopt y devuelve el código de salida."""
    controller = get_design_controller()
    try:
        if args["construct"]:
            output = controller.construct(
                args["--config"],
                starts=_int_or_none(args["--starts"]),
                seed=_int_or_none(args["--seed"]),
                jobs=_int_or_none(args["--jobs"]),
                out=args["--out"],
            )
        elif args["parse"]:
            output = controller.parse(args["<formula>"])
        elif args["anova"]:
            output = controller.anova(args["--config"], args["--design"], out=args["--out"])
        else:
            output = controller.compare(
                args["--config"],
                args["--design"],
                reference=args["--ref"],
                eta_spec=args["--eta-grid"],
                out=args["--out"],
            )
    except FormulaSyntaxError as exc:
        print(f"Error de fórmula: {exc}", file=sys.stderr)
        print(exc.caret(), file=sys.stderr)
        return exit_code_for(exc)
    except EstratoError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except ValueError as exc:
        # argumentos numéricos mal formados
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    _print_output(output)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = docopt(__doc__, argv=argv)
    configure_logging()
    if args.get("--json-log"):
        _enable_json_log()
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
