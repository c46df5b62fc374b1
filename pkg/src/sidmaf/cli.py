"""Command-line entrypoint binding the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data error. All randomness in a
subcommand flows from its --seed flag.
"""

from __future__ import annotations

import hashlib
import json
import sys

import click

from . import __version__
from . import dataset as ds
from . import features as ft
from . import kpi as kpimod
from . import simulator as sim
from .dataset import DataError
from .forest import AcceptanceForest, cross_validate, feature_ranking
from .selection import select_drivers, score_candidates


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _provenance(inputs: dict, config: dict) -> dict:
    return {
        "tool_version": __version__,
        "config": config,
        "input_digests": {name: _digest(p) for name, p in inputs.items() if p},
    }


@click.group()
def cli():
    """Driver-acceptance modelling, driver-subset selection and replay
    simulation for on-demand transport market formation."""


@cli.command("import")
@click.option("--in", "src", required=True, type=click.Path(exists=True))
@click.option("--orders-out", required=True, type=click.Path())
@click.option("--trails-out", type=click.Path())
def import_cmd(src, orders_out, trails_out):
    """Convert a nested JSON export into the canonical JSONL/CSV files."""
    n = ds.import_external(src, orders_out, trails_out)
    click.echo(f"imported {n} orders -> {orders_out}")


@cli.command("gen-synthetic")
@click.option("--orders-out", required=True, type=click.Path())
@click.option("--trails-out", required=True, type=click.Path())
@click.option("--drivers", default=20, show_default=True)
@click.option("--orders", default=200, show_default=True)
@click.option("--distance-decay", default=1.5, show_default=True)
@click.option("--base-logit", default=1.0, show_default=True)
@click.option("--duration-hours", default=6.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def gen_synthetic_cmd(orders_out, trails_out, drivers, orders, distance_decay,
                      base_logit, duration_hours, seed):
    """Generate a seeded synthetic dataset with a known acceptance law."""
    config = ds.SyntheticConfig(
        n_drivers=drivers, n_orders=orders, distance_decay=distance_decay,
        base_logit=base_logit, duration_s=int(duration_hours * 3600))
    data = ds.generate_synthetic(config, seed)
    ds.write_dataset(data, orders_out, trails_out)
    click.echo(f"wrote {len(data.orders)} orders and {len(data.trails)} trails")


@cli.command("summary")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--trails", type=click.Path(exists=True))
def summary_cmd(data, trails):
    """Dataset counts: orders, instances, accepts, drivers, completion."""
    d = ds.load_dataset(data, trails)
    s = ds.dataset_summary(d)
    click.echo(json.dumps({
        "orders": s.n_orders,
        "instances": s.n_instances,
        "accepts": s.n_accepts,
        "reject_or_timeout": s.n_reject_or_timeout,
        "drivers": s.n_drivers,
        "completed": s.n_completed,
        "completed_fraction": round(s.completed_fraction, 4),
        "accept_fraction": round(s.accept_fraction, 4),
    }, indent=2))


@cli.command("features")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--timezone", "tz_name", default=ft.DEFAULT_TIMEZONE, show_default=True)
def features_cmd(data, out, tz_name):
    """Export the feature matrix with labels as CSV."""
    d = ds.load_dataset(data)
    X, y = ft.build_matrix(d, tz_name=tz_name)
    ft.write_matrix_csv(X, y, out)
    click.echo(f"wrote {len(y)} instances -> {out}")


@cli.command("train")
@click.option("--in", "features_in", required=True, type=click.Path(exists=True))
@click.option("--out", "model_out", required=True, type=click.Path())
@click.option("--trees", default=200, show_default=True)
@click.option("--max-depth", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True)
def train_cmd(features_in, model_out, trees, max_depth, seed, jobs):
    """Train the acceptance forest on an exported feature matrix."""
    X, y = ft.read_matrix_csv(features_in)
    model = AcceptanceForest(n_trees=trees, max_depth=max_depth, seed=seed,
                             n_jobs=jobs)
    model.fit(X, y)
    model.train_meta_["provenance"] = _provenance(
        {"features": features_in},
        {"trees": trees, "max_depth": max_depth, "seed": seed})
    model.save(model_out)
    click.echo(f"trained {trees} trees on {len(y)} instances -> {model_out}")


@cli.command("cv")
@click.option("--in", "features_in", required=True, type=click.Path(exists=True))
@click.option("--folds", default=5, show_default=True)
@click.option("--trees", default=200, show_default=True)
@click.option("--max-depth", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True)
def cv_cmd(features_in, folds, trees, max_depth, seed, jobs):
    """Stratified k-fold cross-validated accuracy and F1."""
    X, y = ft.read_matrix_csv(features_in)
    rep = cross_validate(X, y, folds,
                         hp={"n_trees": trees, "max_depth": max_depth,
                             "n_jobs": jobs},
                         seed=seed)
    for i, (acc, f1) in enumerate(rep.per_fold):
        click.echo(f"fold {i}: accuracy={acc:.4f} f1={f1:.4f}")
    click.echo(f"mean: accuracy={rep.accuracy:.4f} f1={rep.f1:.4f}")


@cli.command("rank-features")
@click.option("--model", required=True, type=click.Path(exists=True))
def rank_features_cmd(model):
    """Print features by descending importance."""
    m = AcceptanceForest.load(model)
    for name, imp in feature_ranking(m):
        click.echo(f"{name:<18} {imp:.4f}")


@cli.command("select")
@click.option("--model", required=True, type=click.Path(exists=True))
@click.option("--order", "order_path", required=True, type=click.Path(exists=True))
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--data", type=click.Path(exists=True),
              help="Orders file for driver-history aggregation.")
@click.option("--k", default=1, show_default=True)
@click.option("--p-target", default=0.999, show_default=True)
def select_cmd(model, order_path, pool_path, data, k, p_target):
    """Run one driver selection and print the result as JSON."""
    m = AcceptanceForest.load(model)
    with open(order_path) as f:
        order = ds._parse_order(json.load(f), order_path)
    with open(pool_path) as f:
        pool_doc = json.load(f)
    try:
        pool = [(str(e["driver_id"]),
                 ds.GeoPoint(float(e["pos"]["lat"]), float(e["pos"]["lon"])))
                for e in pool_doc]
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{pool_path}: {e}") from e
    histories = ft.build_histories(ds.load_dataset(data)) if data \
        else ft.HistoryTable({})
    candidates = score_candidates(m, order, pool, histories)
    result = select_drivers(candidates, k, p_target)
    click.echo(json.dumps({
        "selected": [{"driver_id": c.driver_id, "accept_prob": c.accept_prob}
                     for c in result.selected],
        "l": result.l,
        "k": result.k,
        "p_target": result.p_target,
        "achieved": result.achieved,
        "satisfied": result.satisfied,
        "provenance": _provenance(
            {"model": model, "order": order_path, "pool": pool_path},
            {"k": k, "p_target": p_target}),
    }, indent=2))


@cli.command("simulate")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--trails", required=True, type=click.Path(exists=True))
@click.option("--policy", required=True,
              type=click.Choice(["sidmaf", "replay", "distance"]))
@click.option("--model", type=click.Path(exists=True))
@click.option("--k", default=1, show_default=True)
@click.option("--p-target", default=0.999, show_default=True)
@click.option("--nearest", default=8, show_default=True,
              help="Pool size for the distance baseline.")
@click.option("--seed", default=0, show_default=True)
@click.option("--staleness", default=60, show_default=True)
@click.option("--speed-fallback", default=24.0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def simulate_cmd(data, trails, policy, model, k, p_target, nearest, seed,
                 staleness, speed_fallback, out):
    """Replay completed orders under a market-formation policy."""
    d = ds.load_dataset(data, trails)
    config = sim.SimulationConfig(staleness_s=staleness,
                                  avg_speed_fallback_kmh=speed_fallback)
    if policy in ("sidmaf", "distance"):
        if not model:
            raise click.UsageError(f"--model is required for --policy {policy}")
        m = AcceptanceForest.load(model)
        histories = ft.build_histories(d)
        if policy == "sidmaf":
            pol = sim.SidmafPolicy(m, histories, k=k, p_target=p_target,
                                   tz_name=config.tz_name)
        else:
            pol = sim.DistanceBaselinePolicy(nearest, m, histories,
                                             tz_name=config.tz_name)
    else:
        pol = sim.ReplayBaselinePolicy()
    trace = sim.run_simulation(d, pol, seed, config)
    sim.write_trace(trace, out)
    click.echo(f"simulated {len(trace.decisions)} orders "
               f"({pol.name}) -> {out}")


@cli.command("compare")
@click.option("--traces", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--out", type=click.Path())
def compare_cmd(traces, out):
    """KPI comparison table across simulation traces."""
    loaded = [sim.read_trace(p) for p in traces]
    comparison = kpimod.compare(loaded)
    comparison["provenance"] = _provenance(
        {f"trace{i}": p for i, p in enumerate(traces)}, {})
    if out:
        with open(out, "w") as f:
            json.dump(comparison, f, indent=2)
    click.echo(kpimod.format_table(comparison))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.exceptions.Abort:
        return 1
    except click.ClickException as e:
        e.show(file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
