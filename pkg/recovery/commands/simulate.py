"""Write cluster-structured synthetic ratings."""

import sys
from pathlib import Path
from typing import Optional

import pydantic
import typer
import yaml

from ..core.simulate import ClusterSpec, simulate_clusters
from ..engine.errors import ConfigError, RecoveryError
from ..engine.logging import log_step, setup_logging

app = typer.Typer()


@app.callback(invoke_without_command=True)
def simulate(
    output_file: Path = typer.Option(
        ...,
        "--output",
        "-o",
        help="Where to write user,item,rating,group",
    ),
    spec_file: Optional[Path] = typer.Option(
        None,
        "--config",
        "-c",
        help="YAML file of generator options (flags below override it)",
    ),
    groups: Optional[int] = typer.Option(None, "--groups", help="Number of user groups"),
    users_per_group: Optional[int] = typer.Option(None, "--users-per-group", help="Users per group"),
    items: Optional[int] = typer.Option(None, "--items", help="Number of items"),
    noise: Optional[float] = typer.Option(None, "--noise", help="Noise standard deviation"),
    profile: Optional[str] = typer.Option(None, "--profile", help="uniform or sinusoid"),
    period: Optional[float] = typer.Option(None, "--period", help="Sinusoid period (seconds)"),
    scale_min: Optional[float] = typer.Option(None, "--scale-min", help="Scale lower bound"),
    scale_max: Optional[float] = typer.Option(None, "--scale-max", help="Scale upper bound"),
    anticorrelated: Optional[bool] = typer.Option(
        None,
        "--anticorrelated/--independent",
        help="Mirror every second group's profile",
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed"),
    log_file: Optional[Path] = typer.Option(
        None,
        "--log",
        help="Write JSONL execution log",
    ),
    verbose: bool = typer.Option(
        False,
        "--verbose",
        "-v",
        help="Enable verbose logging",
    ),
) -> None:
    """Generate dense ratings where each group shares a profile plus noise."""
    setup_logging(None, verbose)
    try:
        options = {}
        if spec_file is not None:
            try:
                options = yaml.safe_load(spec_file.read_text()) or {}
            except (OSError, yaml.YAMLError) as e:
                raise ConfigError(f"cannot read {spec_file}: {e}") from e
            if not isinstance(options, dict):
                raise ConfigError("generator options must be a mapping", line=1)
        flags = {
            "n_groups": groups,
            "users_per_group": users_per_group,
            "n_items": items,
            "noise_sd": noise,
            "profile": profile,
            "period_seconds": period,
            "scale_min": scale_min,
            "scale_max": scale_max,
            "anticorrelated": anticorrelated,
            "seed": seed,
        }
        options.update({k: v for k, v in flags.items() if v is not None})
        try:
            spec = ClusterSpec.model_validate(options)
        except pydantic.ValidationError as e:
            error = e.errors()[0]
            key = ".".join(str(p) for p in error.get("loc", ())) or None
            raise ConfigError(error["msg"], key=key) from e

        frame = simulate_clusters(spec)
        frame.to_csv(output_file, index=False, float_format="%.12g")
        log_step(
            "simulate",
            {"output": output_file, "n_ratings": len(frame), **spec.model_dump(mode="json")},
            log_file,
        )
    except RecoveryError as e:
        print(f"error: {e}", file=sys.stderr)
        raise typer.Exit(e.exit_code)
