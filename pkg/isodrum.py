import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from config import Config, ConfigError, ExperimentConfig, load_experiment


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def limit_threads(threads: int) -> None:
    """Pin BLAS threads; must run before numpy is first imported."""
    if threads > 0:
        for name in THREAD_VARIABLES:
            os.environ[name] = str(threads)


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"已寫入: {path}")
    return path


def write_json(path: Path, data) -> Path:
    return write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_build(service, config: ExperimentConfig, out_dir: Path, args) -> int:
    text = service.build(config)
    print(text, end="")
    write_text(out_dir / "domains.txt", text)
    return EXIT_OK


def cmd_solve(service, config: ExperimentConfig, out_dir: Path, args) -> int:
    from eigen import EigenSolverError
    from grid import to_text as grid_text
    from operators import export_matrix_market

    exit_code = EXIT_OK
    for domain in service.domains(config):
        try:
            outcome = service.solve_domain(config, domain)
        except EigenSolverError as exc:
            print(f"錯誤: {domain.name}: {exc}", file=sys.stderr)
            if exc.partial is not None:
                write_text(out_dir / f"spectrum_{domain.name}.csv", exc.partial.to_csv(converged=False))
            exit_code = EXIT_NUMERICAL
            continue

        spectrum = outcome.spectrum
        if spectrum.certified:
            write_text(out_dir / f"spectrum_{domain.name}.csv", spectrum.to_csv())
        else:
            print(f"警告: {domain.name} 的殘差未達容許值", file=sys.stderr)
            write_text(out_dir / f"spectrum_{domain.name}.csv", spectrum.to_csv(converged=False))
            exit_code = EXIT_NUMERICAL

        write_json(out_dir / f"solve_{domain.name}.json", outcome.summary())
        if config.dump:
            path = outcome.field_dump().write(out_dir / f"psi1_{domain.name}.bin")
            print(f"已寫入: {path}")
            write_text(out_dir / f"grid_{domain.name}.txt", grid_text(outcome.grid))
        if args.dump_matrix:
            path = export_matrix_market(outcome.operator, out_dir / f"operator_{domain.name}.mtx")
            print(f"已寫入: {path}")
    return exit_code


def cmd_compare(service, config: ExperimentConfig, out_dir: Path, args) -> int:
    report = service.compare(config)
    print(json.dumps(
        {key: report[key] for key in ("intertwining_residual", "exact", "max_abs_diff", "max_rel_diff")},
        indent=2,
    ))
    write_json(out_dir / "compare.json", report)
    if not report["certified"]:
        uncertified = [name for name, info in report["solver"].items() if not info["certified"]]
        print(f"錯誤: {', '.join(uncertified)} 的殘差未達容許值", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_extrapolate(service, config: ExperimentConfig, out_dir: Path, args) -> int:
    csv_path = Path(args.csv)
    if not csv_path.exists():
        raise ConfigError(f"CSV 檔案不存在: {csv_path}")
    result = service.extrapolate(csv_path.read_text(encoding="utf-8"), order=args.order, quantity=args.quantity)
    print(f"外推極限: {result['limit']!r} (穩定度 {result['stability']:.3e})")
    write_json(out_dir / f"extrapolate_{args.quantity}.json", result)
    return EXIT_OK


def cmd_field_dump(service, config: ExperimentConfig, out_dir: Path, args) -> int:
    from grid import to_text as grid_text

    config = replace(config, k=1)
    for domain in service.domains(config):
        outcome = service.solve_domain(config, domain)
        path = outcome.field_dump().write(out_dir / f"psi1_{domain.name}.bin")
        print(f"已寫入: {path}")
        write_text(out_dir / f"grid_{domain.name}.txt", grid_text(outcome.grid))
    return EXIT_OK


def cmd_sweep(service, config: ExperimentConfig, out_dir: Path, args) -> int:
    from sweep import run_sweep_direct, sweep_flow

    if args.no_prefect:
        report = run_sweep_direct(config, order=args.order)
    else:
        report = sweep_flow(config.to_text(), order=args.order)
    write_json(out_dir / "sweep.json", report)
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "extrapolate": cmd_extrapolate,
    "field-dump": cmd_field_dump,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="實驗設定檔 (key=value 或 .json)")
    common.add_argument("--out", metavar="DIR", help=f"輸出目錄，預設 {Config.OUTPUT_DIR}")
    common.add_argument("--dump-matrix", action="store_true", help="以 MatrixMarket 格式輸出算子矩陣")
    common.add_argument("--threads", type=int, default=Config.THREADS, metavar="N", help="BLAS 執行緒數，0 為系統預設")
    common.add_argument("--seed", type=int, metavar="S", help="覆寫設定檔中的隨機種子")
    common.add_argument("--verbose", "-v", action="store_true", help="顯示除錯紀錄")

    parser = argparse.ArgumentParser(
        description="GWW 等譜鼓實驗工具：建構區域、求解特徵值、驗證等譜性與外推",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "範例:\n"
            "  python isodrum.py build --config experiments/pattern.env\n"
            "  python isodrum.py solve --config experiments/square.env --dump-matrix\n"
            "  python isodrum.py compare --config experiments/efield.env\n"
            "  python isodrum.py extrapolate levels.csv --order 2\n"
            "  python isodrum.py sweep --config experiments/table.env\n"
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in ("build", "solve", "compare", "field-dump"):
        subparsers.add_parser(name, parents=[common])
    extrapolate = subparsers.add_parser("extrapolate", parents=[common])
    extrapolate.add_argument("csv", help="每列為 h,E 的 CSV 檔案")
    extrapolate.add_argument("--order", type=int, default=2, help="誤差展開的 h 次方，預設 2")
    extrapolate.add_argument("--quantity", default="E1", help="輸出標籤，預設 E1")
    sweep = subparsers.add_parser("sweep", parents=[common])
    sweep.add_argument("--order", type=int, default=2, help="誤差展開的 h 次方，預設 2")
    sweep.add_argument("--no-prefect", action="store_true", help="不透過 Prefect 執行")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    limit_threads(args.threads)

    from eigen import EigenSolverError
    from experiment_service import ExperimentService
    from transplant import TransplantError

    try:
        config = load_experiment(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        out_dir = Path(args.out) if args.out else Path(Config.ensure_output_dir())
        service = ExperimentService(on_progress=print)
        return COMMANDS[args.command](service, config, out_dir, args)
    except (EigenSolverError, TransplantError) as exc:
        print(f"錯誤: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"錯誤: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
