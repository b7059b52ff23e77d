"""Experiment config validation and resolution for hhsharp"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from errors import ConfigError, HHError
from group import HomogeneousGroup, parse_norm
from hh_config import MCDefaults, QuadDefaults, SweepDefaults
from kernels import CATALOG, Kernel, catalog, make_kernel, parse_kernel
from logger import get_logger
from quad import Tolerance
from verify import RadialFunction, radial_function

logger = get_logger("config_validator")

SCHEMA_PATH = Path(__file__).resolve().parent / "docs" / "schemas" / "experiment_config.json"

MODES = ("classical", "group", "theorem31")
FORMATS = ("json", "csv")
FUNCTION_KINDS = ("power_cutoff", "indicator", "expr", "zero")

DEFAULT_FUNCTIONS: list[dict[str, Any]] = [
    {"power_cutoff": {"beta": 0.5}},
    {"power_cutoff": {"beta": 0.25}},
    {"power_cutoff": {"beta": 0.1}},
]

# JSON schema "type" -> accepted Python types
_JSON_TYPES: dict[str, tuple[type, ...]] = {
    "object": (dict,),
    "array": (list,),
    "string": (str,),
    "number": (int, float),
    "integer": (int,),
    "boolean": (bool,),
}


@dataclass
class ValidationResult:
    """Result of a configuration validation check"""
    is_valid: bool
    field: str
    message: str
    is_required: bool = True


def _ok(field: str, message: str) -> ValidationResult:
    return ValidationResult(True, field, message)


def _bad(field: str, message: str, required: bool = True) -> ValidationResult:
    return ValidationResult(False, field, message, required)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Nested dict merge; values in overrides win, None values are ignored"""
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            current = out.get(key)
            out[key] = deep_merge(current if isinstance(current, dict) else {}, value)
        else:
            out[key] = copy.deepcopy(value)
    return out


class ConfigValidator:
    """Validates an experiment config and resolves every default it leaves out"""

    def __init__(self, config_path: Path | None = None,
                 overrides: dict[str, Any] | None = None,
                 schema_path: Path | None = None) -> None:
        self.config_path = Path(config_path) if config_path is not None else None
        self.overrides = overrides or {}
        self.schema_path = schema_path or SCHEMA_PATH
        self.config: dict[str, Any] = {}
        self.schema: dict[str, Any] = {}
        self.validation_results: list[ValidationResult] = []

    def load_config(self) -> bool:
        """
        Load the config file (if any) and apply command-line overrides.

        Returns:
            True if config was loaded successfully, False otherwise
        """
        data: dict[str, Any] = {}
        if self.config_path is not None:
            try:
                with open(self.config_path, "r") as f:
                    data = json.load(f)
            except FileNotFoundError:
                logger.error(f"Config file not found at {self.config_path}")
                return False
            except json.JSONDecodeError as e:
                logger.error(f"Invalid JSON in config file: {e}")
                return False
            except OSError as e:
                logger.error(f"Error loading config file: {e}")
                return False
            if not isinstance(data, dict):
                logger.error(f"Config file must hold a JSON object, got {type(data).__name__}")
                return False
            logger.info(f"Configuration loaded from {self.config_path}")
        self.config = deep_merge(data, self.overrides)
        return True

    def load_schema(self) -> dict[str, Any]:
        try:
            with open(self.schema_path, "r") as f:
                self.schema = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Config schema unavailable at {self.schema_path}: {e}")
            self.schema = {}
        return self.schema

    # ------------------------------------------------------------------
    # Individual checks
    # ------------------------------------------------------------------

    def validate_schema_fields(self) -> list[ValidationResult]:
        """Top-level fields must be known to the schema and carry its declared type"""
        properties = self.schema.get("properties", {})
        if not properties:
            return [_bad("schema", "Config schema not loaded; field check skipped", False)]
        results: list[ValidationResult] = []
        for name, value in self.config.items():
            spec = properties.get(name)
            if spec is None:
                results.append(_bad(name, f"Unknown config field '{name}'"))
                continue
            accepted = _JSON_TYPES.get(spec.get("type", ""), ())
            if accepted and (not isinstance(value, accepted)
                             or (bool not in accepted and isinstance(value, bool))):
                results.append(_bad(name, f"Field '{name}' must be of type {spec['type']}"))
        if not results:
            results.append(_ok("schema", "All fields match the config schema"))
        return results

    def validate_mode(self) -> ValidationResult:
        mode = self.config.get("mode")
        if mode is None:
            return _ok("mode", "Mode: default")
        if mode not in MODES:
            return _bad("mode", f"Unknown mode '{mode}' (expected one of: {', '.join(MODES)})")
        if mode == "classical" and "group" in self.config:
            return _bad("mode", "Classical mode runs on the half-line; remove 'group' or use mode 'group'")
        if mode == "theorem31" and "group" not in self.config:
            return _bad("mode", "theorem31 mode needs a 'group'")
        return _ok("mode", f"Mode: {mode}")

    def validate_group(self) -> ValidationResult:
        spec = self.config.get("group")
        if spec is None:
            return _ok("group", "Group: half-line")
        if not isinstance(spec, dict):
            return _bad("group", "Group must be an object")
        weights = spec.get("weights")
        if not isinstance(weights, list) or not weights or not all(_is_number(w) for w in weights):
            return _bad("group.weights", "Group weights must be a non-empty list of numbers")
        try:
            kind, power = parse_norm(spec.get("norm", "max"))
            HomogeneousGroup(tuple(float(w) for w in weights), kind, power,
                             spec.get("sphere_measure_override"))
        except HHError as e:
            return _bad("group", f"Invalid group: {e}")
        return _ok("group", f"Group: weights {weights}, norm {spec.get('norm', 'max')}")

    def validate_kernel(self) -> ValidationResult:
        spec = self.config.get("kernel")
        if spec is None:
            return _ok("kernel", "Kernel: default (hilbert)")
        if isinstance(spec, str):
            spec = {"catalog": spec}
        if not isinstance(spec, dict):
            return _bad("kernel", "Kernel must be a catalog name or an object")
        if "expr" in spec and "catalog" in spec:
            return _bad("kernel", "Give either 'expr' or 'catalog', not both")
        if "expr" in spec:
            try:
                parse_kernel(str(spec["expr"]))
            except HHError as e:
                return _bad("kernel.expr", f"Kernel does not parse: {e}")
            order = spec.get("order")
            if order is not None and not _is_number(order):
                return _bad("kernel.order", "Kernel order must be a number")
            return _ok("kernel", f"Kernel: {spec['expr']}")
        name = spec.get("catalog")
        entry = CATALOG.get(name)
        if entry is None:
            return _bad("kernel.catalog",
                        f"Unknown catalog kernel '{name}'. Known: {', '.join(CATALOG)}")
        extra = [k for k in spec if k != "catalog" and k not in entry.params]
        if extra:
            return _bad("kernel", f"{name} does not take parameters {extra} (takes {entry.params})")
        bad = [k for k in entry.params if k in spec and not _is_number(spec[k])]
        if bad:
            return _bad("kernel", f"Kernel parameters {bad} must be numbers")
        return _ok("kernel", f"Kernel: {name}")

    def validate_p(self) -> ValidationResult:
        p = self.config.get("p", 2.0)
        if not _is_number(p) or not p > 1:
            return _bad("p", f"p must be a finite real > 1, got {p!r}")
        return _ok("p", f"p = {p}")

    def validate_functions(self) -> list[ValidationResult]:
        functions = self.config.get("functions")
        if functions is None:
            return [_ok("functions", "Test functions: default PowerCutoff family")]
        if not isinstance(functions, list) or not functions:
            return [_bad("functions", "functions must be a non-empty list")]
        results = []
        for i, entry in enumerate(functions):
            if isinstance(entry, dict) and "f" in entry:
                specs = [entry["f"], entry.get("g", entry["f"])]
            else:
                specs = [entry]
            for spec in specs:
                message = _function_spec_problem(spec)
                if message:
                    results.append(_bad(f"functions[{i}]", message))
        if not results:
            results.append(_ok("functions", f"{len(functions)} test function entries"))
        return results

    def validate_sequences(self) -> list[ValidationResult]:
        results = []
        betas = self.config.get("betas")
        if betas is not None:
            if (not isinstance(betas, list) or not betas
                    or not all(_is_number(b) and b > 0 for b in betas)):
                results.append(_bad("betas", "betas must be a non-empty list of positive numbers"))
            elif any(b2 >= b1 for b1, b2 in zip(betas, betas[1:])):
                results.append(_bad("betas", f"betas must be strictly decreasing, got {betas}"))
        scales = self.config.get("scales")
        if scales is not None:
            if (not isinstance(scales, list)
                    or not all(_is_number(a) and a > 0 for a in scales)):
                results.append(_bad("scales", "scales must be a list of positive numbers"))
            elif len(scales) < SweepDefaults.MIN_SCALES:
                results.append(_bad("scales", f"need at least {SweepDefaults.MIN_SCALES} scales"))
        radii = self.config.get("radii")
        if radii is not None and (not isinstance(radii, list)
                                  or not all(_is_number(r) and r > 0 for r in radii)):
            results.append(_bad("radii", "radii must be a list of positive numbers"))
        if not results:
            results.append(_ok("sequences", "betas, scales and radii valid"))
        return results

    def validate_tolerance(self) -> ValidationResult:
        spec = self.config.get("tolerance", {})
        if not isinstance(spec, dict):
            return _bad("tolerance", "tolerance must be an object")
        try:
            Tolerance(float(spec.get("rel", QuadDefaults.REL_TOL)),
                      float(spec.get("abs", QuadDefaults.ABS_TOL)),
                      int(spec.get("max_subdiv", QuadDefaults.MAX_SUBDIV)))
        except (HHError, TypeError, ValueError) as e:
            return _bad("tolerance", f"Invalid tolerance: {e}")
        return _ok("tolerance", "Tolerance valid")

    def validate_mc(self) -> ValidationResult:
        spec = self.config.get("mc", {})
        if not isinstance(spec, dict):
            return _bad("mc", "mc must be an object")
        samples = spec.get("samples", MCDefaults.SAMPLES)
        if not isinstance(samples, int) or samples < MCDefaults.MIN_SAMPLES:
            return _bad("mc.samples", f"mc.samples must be an integer >= {MCDefaults.MIN_SAMPLES}")
        if not isinstance(spec.get("seed", MCDefaults.SEED), int):
            return _bad("mc.seed", "mc.seed must be an integer")
        chunk = spec.get("chunk_size", MCDefaults.CHUNK_SIZE)
        if chunk is not None and (not isinstance(chunk, int) or chunk < 2):
            return _bad("mc.chunk_size", "mc.chunk_size must be an integer >= 2")
        workers = spec.get("max_workers", MCDefaults.MAX_WORKERS)
        if not isinstance(workers, int) or workers < 1:
            return _bad("mc.max_workers", "mc.max_workers must be a positive integer")
        return _ok("mc", f"Monte Carlo: {samples} samples")

    def validate_output(self) -> ValidationResult:
        spec = self.config.get("output", {})
        if not isinstance(spec, dict):
            return _bad("output", "output must be an object")
        fmt = spec.get("format", "json")
        if fmt not in FORMATS:
            return _bad("output.format", f"Unknown output format '{fmt}' (json or csv)")
        path = spec.get("path")
        if path is not None and not Path(path).parent.exists():
            return _bad("output.path", f"Output directory does not exist: {Path(path).parent}")
        return _ok("output", f"Output: {fmt}")

    def validate_all(self) -> tuple[bool, list[ValidationResult]]:
        """
        Run all validation checks.

        Returns:
            Tuple of (all_required_valid, list of all results)
        """
        self.validation_results = []

        if not self.load_config():
            self.validation_results.append(_bad("config_file", "Failed to load configuration file"))
            return False, self.validation_results
        self.load_schema()

        self.validation_results.extend(self.validate_schema_fields())
        self.validation_results.append(self.validate_mode())
        self.validation_results.append(self.validate_group())
        self.validation_results.append(self.validate_kernel())
        self.validation_results.append(self.validate_p())
        self.validation_results.extend(self.validate_functions())
        self.validation_results.extend(self.validate_sequences())
        self.validation_results.append(self.validate_tolerance())
        self.validation_results.append(self.validate_mc())
        self.validation_results.append(self.validate_output())

        all_required_valid = all(
            r.is_valid for r in self.validation_results if r.is_required
        )
        return all_required_valid, self.validation_results

    def failures(self) -> list[ValidationResult]:
        return [r for r in self.validation_results if not r.is_valid and r.is_required]

    def print_validation_report(self) -> None:
        """Print a formatted validation report"""
        print("\n" + "=" * 60)
        print("HHSHARP - EXPERIMENT CONFIG VALIDATION")
        print("=" * 60)

        valid_results = [r for r in self.validation_results if r.is_valid]
        invalid_required = self.failures()
        invalid_optional = [r for r in self.validation_results
                            if not r.is_valid and not r.is_required]

        if invalid_required:
            print("\n[ERRORS]")
            for r in invalid_required:
                print(f"  ✗ {r.field}: {r.message}")

        if invalid_optional:
            print("\n[WARNINGS]")
            for r in invalid_optional:
                print(f"  ⚠ {r.message}")

        if valid_results:
            print("\n[OK]")
            for r in valid_results:
                print(f"  ✓ {r.message}")

        print("\n" + "=" * 60)
        print("STATUS: CONFIGURATION ERRORS FOUND" if invalid_required else "STATUS: CONFIG VALID")
        print("=" * 60 + "\n")

    # ------------------------------------------------------------------
    # Resolution
    # ------------------------------------------------------------------

    def resolve(self) -> dict[str, Any]:
        """
        Validate, then return the config with every default made explicit.

        Raises:
            ConfigError: validation failed (failures lists the ValidationResults)
        """
        all_valid, _ = self.validate_all()
        for result in self.validation_results:
            if result.is_valid:
                logger.debug(f"Config validation: {result.message}")
            elif result.is_required:
                logger.error(f"Config validation: {result.field}: {result.message}")
            else:
                logger.warning(f"Config validation: {result.message}")
        if not all_valid:
            failures = self.failures()
            raise ConfigError(
                "invalid experiment config: " + "; ".join(f"{r.field}: {r.message}" for r in failures),
                failures)
        return resolve_defaults(self.config)


def resolve_defaults(config: dict[str, Any]) -> dict[str, Any]:
    """Fill every default into an already-validated config"""
    cfg = copy.deepcopy(config)
    has_group = "group" in cfg
    mode = cfg.get("mode", "group" if has_group else "classical")

    if has_group:
        spec = cfg["group"]
        group = {
            "weights": [float(w) for w in spec["weights"]],
            "norm": HomogeneousGroup.from_config(spec).norm_label,
            "sphere_measure_override": spec.get("sphere_measure_override"),
        }
    else:
        group = HomogeneousGroup.half_line().to_dict()
        group = {k: group[k] for k in ("weights", "norm", "sphere_measure_override")}

    p = float(cfg.get("p", 2.0))
    mc_spec = cfg.get("mc", {})
    mc = {
        "samples": int(mc_spec.get("samples", MCDefaults.SAMPLES)),
        "seed": int(mc_spec.get("seed", MCDefaults.SEED)),
        "chunk_size": mc_spec.get("chunk_size", MCDefaults.CHUNK_SIZE),
        "max_workers": int(mc_spec.get("max_workers", MCDefaults.MAX_WORKERS)),
    }
    tol_spec = cfg.get("tolerance", {})
    tolerance = {
        "rel": float(tol_spec.get("rel", QuadDefaults.REL_TOL)),
        "abs": float(tol_spec.get("abs", QuadDefaults.ABS_TOL)),
        "max_subdiv": int(tol_spec.get("max_subdiv", QuadDefaults.MAX_SUBDIV)),
    }
    out_spec = cfg.get("output", {})

    resolved = {
        "mode": mode,
        "group": group,
        "p": p,
        "functions": cfg.get("functions", copy.deepcopy(DEFAULT_FUNCTIONS)),
        "betas": [float(b) for b in cfg.get("betas", SweepDefaults.BETAS)],
        "scales": [float(a) for a in cfg.get("scales", SweepDefaults.SCALES)],
        "radii": [float(r) for r in cfg.get("radii", SweepDefaults.RADII)],
        "pairing": bool(cfg.get("pairing", False)),
        "tolerance": tolerance,
        "mc": mc,
        "output": {"format": out_spec.get("format", "json"), "path": out_spec.get("path")},
    }
    resolved["kernel"] = _resolve_kernel(cfg.get("kernel"), resolved)
    return resolved


def _resolve_kernel(spec: Any, resolved: dict[str, Any]) -> dict[str, Any]:
    if spec is None:
        spec = {"catalog": "hilbert"}
    elif isinstance(spec, str):
        spec = {"catalog": spec}
    if "expr" in spec:
        return {"expr": str(spec["expr"]),
                "order": None if spec.get("order") is None else float(spec["order"])}
    name = spec["catalog"]
    out: dict[str, Any] = {"catalog": name}
    defaults: dict[str, Any] = {"lam": 1.0, "k_exp": 2.0, "p": resolved["p"]}
    for param in CATALOG[name].params:
        if param in spec:
            out[param] = float(spec[param])
        elif param in defaults:
            out[param] = float(defaults[param])
        elif param == "Q":
            out["Q"] = build_group(resolved).Q
        elif param == "c":
            group = build_group(resolved)
            out["c"] = group.Q / group.sphere_measure
    return out


def _function_spec_problem(spec: Any) -> str:
    """Message describing what is wrong with a test function spec, '' if valid"""
    if not isinstance(spec, dict):
        return f"test function spec must be an object, got {spec!r}"
    kinds = [k for k in spec if k in FUNCTION_KINDS]
    if len(kinds) != 1:
        return f"test function spec needs exactly one of {FUNCTION_KINDS}, got {sorted(spec)}"
    kind = kinds[0]
    if kind == "power_cutoff":
        args = spec["power_cutoff"]
        if not isinstance(args, dict) or not _is_number(args.get("beta")) or not args["beta"] > 0:
            return "power_cutoff needs a positive 'beta'"
    elif kind == "indicator":
        bounds = spec["indicator"]
        if (not isinstance(bounds, list) or len(bounds) != 2
                or not all(isinstance(b, (int, float)) for b in bounds)
                or not 0 <= bounds[0] < bounds[1]):
            return "indicator needs [a, b] with 0 <= a < b"
    elif kind == "expr":
        try:
            parse_kernel(str(spec["expr"]), variables=("r",))
        except HHError as e:
            return f"test function does not parse: {e}"
    elif spec["zero"] is not True:
        return "zero spec must be {\"zero\": true}"
    return ""


# ============================================================================
# Builders from a resolved config
# ============================================================================

def build_group(resolved: dict[str, Any]) -> HomogeneousGroup:
    mc = resolved["mc"]
    return HomogeneousGroup.from_config(resolved["group"], mc["samples"], mc["seed"])


def build_tolerance(resolved: dict[str, Any]) -> Tolerance:
    tol = resolved["tolerance"]
    return Tolerance(tol["rel"], tol["abs"], tol["max_subdiv"])


def build_kernel(resolved: dict[str, Any]) -> Kernel:
    spec = resolved["kernel"]
    if "expr" in spec:
        return make_kernel(spec["expr"], spec.get("order"))
    params = {k: v for k, v in spec.items() if k != "catalog"}
    return catalog(spec["catalog"], **params)


def build_function_pairs(resolved: dict[str, Any], group: HomogeneousGroup
                         ) -> list[tuple[RadialFunction, RadialFunction]]:
    """
    (f, g) pairs: f measured in L^p, g in L^q.

    An entry is either one spec, used for both f and g with their own
    exponents, or {"f": spec, "g": spec}.
    """
    p = resolved["p"]
    q = p / (p - 1.0)
    pairs = []
    for entry in resolved["functions"]:
        if isinstance(entry, dict) and "f" in entry:
            f_spec, g_spec = entry["f"], entry.get("g", entry["f"])
        else:
            f_spec = g_spec = entry
        pairs.append((radial_function(f_spec, p, group.Q), radial_function(g_spec, q, group.Q)))
    return pairs


def validate_config_on_startup(config_path: Path | None,
                               overrides: dict[str, Any] | None = None) -> dict[str, Any]:
    """Convenience wrapper: validate and resolve, raising ConfigError on failure"""
    return ConfigValidator(config_path, overrides).resolve()


if __name__ == "__main__":
    import sys

    from logger import setup_logging

    setup_logging()
    validator = ConfigValidator(Path(sys.argv[1]) if len(sys.argv) > 1 else None)
    all_valid, _ = validator.validate_all()
    validator.print_validation_report()
    sys.exit(0 if all_valid else 1)
