"""``playervalue`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import __version__, pipeline
from .config import dump_default_config, load_config, parse_override
from .errors import DataError, FoldError, PlayerValueError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("playervalue")


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, FoldError):
        return exit_code(exc.cause)
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, (UsageError, click.UsageError)):
        return EXIT_USAGE
    if isinstance(exc, (FileNotFoundError, IsADirectoryError)):
        return EXIT_USAGE
    return EXIT_INTERNAL


def _run(fn, *args):
    try:
        return fn(*args)
    except (PlayerValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exit_code(exc))
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        click.echo(f"internal error: {exc!r}", err=True)
        sys.exit(EXIT_INTERNAL)


def _config(ctx: click.Context, **overrides) -> dict:
    """Config file, then ``--set`` pairs, then the command's own flags."""
    obj = ctx.obj
    layers = [parse_override(s) for s in obj["set"]]
    for key, value in overrides.items():
        if value is not None:
            layers.append(_nest(key, value))
    if obj["seed"] is not None:
        layers.append({"seed": obj["seed"]})
    if obj["output_dir"] is not None:
        layers.append({"output_dir": obj["output_dir"]})
    return _run(load_config, obj["config"], layers)


def _nest(dotted: str, value) -> dict:
    out = value
    for part in reversed(dotted.split(".")):
        out = {part: out}
    return out


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="playervalue")
@click.option("-c", "--config", "config_path", type=click.Path(dir_okay=False), help="YAML config file.")
@click.option("-o", "--output-dir", type=click.Path(file_okay=False),
              help="Output directory (default: $PLAYERVALUE_OUTPUT_DIR or ./playervalue-out).")
@click.option("--seed", type=int, help="Override the config seed.")
@click.option("--set", "set_", multiple=True, metavar="KEY=VALUE",
              help="Override a config key, e.g. --set boruta.alpha=0.01 (repeatable).")
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug output.")
@click.pass_context
def main(ctx, config_path, output_dir, seed, set_, verbose):
    """Player market-value modelling pipeline."""
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config_path, "output_dir": output_dir, "seed": seed, "set": set_}


@main.command()
@click.option("--rows", default=1000, show_default=True, help="Number of players.")
@click.option("--seed", "synth_seed", default=1, show_default=True, help="Generator seed.")
@click.option("--goalkeeper-fraction", default=0.1, show_default=True)
@click.option("--missing-fraction", default=0.01, show_default=True)
@click.argument("output", type=click.Path(dir_okay=False))
def synth(rows, synth_seed, goalkeeper_fraction, missing_fraction, output):
    """Write a synthetic player CSV in the full scraped schema to OUTPUT."""
    from .synth import generate_players, write_players

    def go():
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        write_players(output, generate_players(rows, synth_seed, goalkeeper_fraction, missing_fraction))

    _run(go)
    click.echo(f"wrote {rows} rows to {output}")


@main.command("init-config")
def init_config():
    """Print the default configuration as YAML."""
    click.echo(dump_default_config(), nl=False)


@main.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Player CSV.")
@click.option("--schema", type=click.Choice(["outfield", "goalkeeper"]))
@click.option("--value-cap", type=float, help="Drop rows valued above this.")
@click.option("--test-fraction", type=float)
@click.option("--impute/--no-impute", default=None, help="Mean-impute missing skills instead of dropping rows.")
@click.pass_context
def prepare(ctx, input_path, schema, value_cap, test_fraction, impute):
    """Clean, cap and split the input; fit Box-Cox on the training target."""
    cfg = _config(ctx, input=input_path, schema=schema, value_cap=value_cap,
                  test_fraction=test_fraction, impute=impute)
    s = _run(pipeline.prepare, cfg)
    click.echo(f"prepared {s['train_rows']} train / {s['test_rows']} test rows in {cfg['output_dir']}")


@main.command()
@click.option("--max-iterations", type=int)
@click.option("--importance", type=click.Choice(["shap", "gain"]))
@click.option("--include-tentative/--exclude-tentative", default=None,
              help="Pass tentative features downstream.")
@click.pass_context
def select(ctx, max_iterations, importance, include_tentative):
    """Boruta feature selection on the training table."""
    cfg = _config(ctx, **{"boruta.max_iterations": max_iterations,
                          "boruta.importance_source": importance,
                          "boruta.include_tentative": include_tentative})
    feats = _run(pipeline.select, cfg)
    click.echo(f"selected {len(feats)} features: {', '.join(feats)}")


@main.command()
@click.option("--k", type=int, help="Cross-validation folds.")
@click.option("--metric-scale", type=click.Choice(["euro", "transformed"]))
@click.option("--criterion", type=click.Choice(["r2", "rmse"]))
@click.pass_context
def tune(ctx, k, metric_scale, criterion):
    """Grid search with k-fold CV over the configured grid."""
    cfg = _config(ctx, **{"cv.k": k, "cv.metric_scale": metric_scale, "cv.criterion": criterion})
    best = _run(pipeline.tune, cfg)
    click.echo(f"best parameters: {best}")


@main.command("train-eval")
@click.option("--k", type=int, help="Cross-validation folds.")
@click.pass_context
def train_eval(ctx, k):
    """Fit the tuned model on train, report CV and held-out test metrics."""
    cfg = _config(ctx, **{"cv.k": k})
    body = _run(pipeline.train_eval, cfg)
    t = body["test"]
    click.echo(
        f"test R2 {t['euro']['r_squared']} / RMSE {t['euro']['rmse']} (euro); "
        f"R2 {t['transformed']['r_squared']} (transformed)"
    )


@main.command()
@click.option("--model", "model_path", type=click.Path(dir_okay=False),
              help="Model artifact (default: <output-dir>/model.json).")
@click.option("--data", type=click.Choice(["test", "train"]))
@click.option("--top-k", type=int)
@click.option("--grid-size", type=int)
@click.option("--max-rows", type=int)
@click.option("--force-rows", type=int)
@click.option("--svg/--no-svg", default=None)
@click.pass_context
def explain(ctx, model_path, data, top_k, grid_size, max_rows, force_rows, svg):
    """SHAP importance, beeswarm, force plots, PDP and dependence exports."""
    cfg = _config(ctx, **{"explain.data": data, "explain.top_k": top_k, "explain.grid_size": grid_size,
                          "explain.max_rows": max_rows, "explain.force_rows": force_rows,
                          "explain.svg": svg})
    s = _run(pipeline.explain, cfg, model_path)
    click.echo(f"explained {s['rows_explained']} rows; top features: {', '.join(s['top_features'])}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
def predict(model_path, input_path, output_path):
    """Predict every row of INPUT on both scales."""
    s = _run(pipeline.predict, model_path, input_path, output_path)
    click.echo(f"predicted {s['rows']} rows ({s['out_of_domain']} out of domain, {s['missing']} incomplete)")


@main.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Player CSV.")
@click.pass_context
def run(ctx, input_path):
    """prepare, select, tune, train-eval, explain and predict in one go."""
    cfg = _config(ctx, input=input_path)
    _run(pipeline.run_all, cfg)
    click.echo(f"pipeline complete; artifacts in {cfg['output_dir']}")


def entry(argv=None) -> int:
    """Console entry point; maps click's own usage errors to exit code 1."""
    try:
        rv = main.main(args=argv, prog_name="playervalue", standalone_mode=False)
    except click.exceptions.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(entry())
