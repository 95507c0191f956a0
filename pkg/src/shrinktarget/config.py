"""Validated experiment configuration.

Rationals may be given as JSON numbers or decimal/fraction strings; floats are
read through their shortest decimal repr, so 0.3 means 3/10.  Every model
rejects unknown fields.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Annotated, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator
from pydantic_core import PydanticCustomError

from .sequences import GrowthSequence, IntegerSet, TargetScheme

EXPERIMENTS = ("hit", "lln", "corr", "fourfold", "bounds", "dim", "weighted", "transverse",
               "ergodic", "vprime", "preset")
PRESETS = ("corollary-1.10", "lln-default", "Q1", "Q2")


def parse_rational(v) -> Fraction:
    if isinstance(v, bool):
        raise PydanticCustomError("rational", "expected a number, got a boolean")
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(Decimal(repr(v)))
    if isinstance(v, str):
        try:
            return Fraction(v.strip()) if "/" in v else Fraction(Decimal(v.strip()))
        except (ValueError, ZeroDivisionError, InvalidOperation):
            pass
    raise PydanticCustomError("rational", "not a rational number: {value}", {"value": repr(v)})


def _canonical(v) -> str:
    return str(parse_rational(v))


Rational = Annotated[str, BeforeValidator(_canonical)]


def _frac(v: str | None) -> Fraction | None:
    return None if v is None else Fraction(v)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SequenceConfig(Strict):
    family: Literal["geometric", "stretched", "polynomial", "explicit"] = "geometric"
    alpha: Rational | None = None
    b: Rational | None = None
    m: int | None = None
    values: list[Rational] | None = None
    delta: Rational | None = None
    c: Rational | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.family == "geometric" and self.alpha is None:
            self.alpha = "2"
        try:
            self.build()
        except ValueError as exc:
            raise PydanticCustomError("sequence", str(exc)) from None
        return self

    def build(self) -> GrowthSequence:
        kw = {"declared_delta": _frac(self.delta), "declared_c": _frac(self.c)}
        if self.family == "geometric":
            return GrowthSequence.geometric(_frac(self.alpha) if self.alpha else Fraction(2), **kw)
        if self.family == "stretched":
            return GrowthSequence.stretched(_frac(self.alpha), _frac(self.b), **kw)
        if self.family == "polynomial":
            return GrowthSequence.polynomial(self.m or 0, **kw)
        return GrowthSequence.explicit([Fraction(v) for v in self.values or ()], **kw)


def _a_range(v: str) -> str:
    if not 0 < Fraction(v) < 1:
        raise PydanticCustomError("range", "out of (0,1)")
    return v


class TargetConfig(Strict):
    a: Annotated[Rational, Field(), BeforeValidator(lambda v: _a_range(_canonical(v)))]
    ell: int = Field(1, ge=1)
    placement: Literal["anchored", "symmetric", "seeded_random", "split"] = "anchored"
    c: Rational = "1"
    n0: int = Field(1, ge=1)
    seed_label: str = "targets"

    def build(self, seed: int, prec: int) -> TargetScheme:
        from .seeding import sub_seed

        return TargetScheme(Fraction(self.a), ell=self.ell, placement=self.placement,
                            seed=sub_seed(seed, self.seed_label) & 0xFFFFFFFF,
                            scale_c=Fraction(self.c), n0=self.n0, prec=prec)


class SetConfig(Strict):
    kind: Literal["all", "primes", "power", "squares", "explicit", "random_density"] = "all"
    d: int | None = Field(None, ge=1)
    values: list[int] | None = None
    gamma: Rational | None = None

    def build(self, seed: int) -> IntegerSet:
        from .seeding import sub_seed

        if self.kind == "squares":
            return IntegerSet.power(2)
        if self.kind == "power":
            return IntegerSet.power(self.d or 0)
        if self.kind == "explicit":
            return IntegerSet.explicit(self.values or ())
        if self.kind == "random_density":
            return IntegerSet.random_density(_frac(self.gamma), sub_seed(seed, "iset"))
        return IntegerSet(self.kind)

    @model_validator(mode="after")
    def _check(self):
        try:
            self.build(0)
        except (ValueError, TypeError) as exc:
            raise PydanticCustomError("set", str(exc)) from None
        return self


class PointConfig(Strict):
    """A starting point y or x: a rational p/q, or a seeded bitstream."""

    kind: Literal["rational", "bitstream"] = "bitstream"
    value: Rational | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "rational" and (self.value is None or not 0 <= Fraction(self.value) <= 1):
            raise PydanticCustomError("point", "rational point needs value in [0,1]")
        return self


class GridConfig(Strict):
    n_min: int = Field(10**3, ge=1)
    n_max: int = Field(10**5, ge=2)
    eta: float = Field(10**0.25, gt=1)
    points: list[int] | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.points is not None:
            if not self.points or any(b <= a for a, b in zip(self.points, self.points[1:])) \
                    or self.points[0] < 1:
                raise PydanticCustomError("grid", "points must be strictly increasing positive integers")
        elif self.n_max <= self.n_min:
            raise PydanticCustomError("grid", "n_max must exceed n_min")
        return self

    def build(self) -> list[int]:
        from .hitting import geometric_grid

        if self.points is not None:
            return list(self.points)
        return [int(v) for v in geometric_grid(self.n_min, self.n_max, self.eta)]


class SystemConfig(Strict):
    kind: Literal["identity", "cyclic", "rotation", "times_p", "disjoint_union"] = "rotation"
    k: int | None = None
    theta: str | Rational | None = None
    p: int | None = None
    thetas: list[str] | None = None
    weight: Rational = "1/2"

    def build(self):
        from .ergolab import NAMED_ANGLES, SystemSpec

        def angle(v):
            return v if v in NAMED_ANGLES else Fraction(parse_rational(v))

        if self.kind == "rotation":
            return SystemSpec.rotation(angle(self.theta if self.theta is not None else "golden"))
        if self.kind == "disjoint_union":
            th = self.thetas or ["golden", "sqrt2"]
            if len(th) != 2:
                raise ValueError("disjoint_union needs two angles")
            return SystemSpec.disjoint_union(angle(th[0]), angle(th[1]), Fraction(self.weight))
        if self.kind == "cyclic":
            return SystemSpec.cyclic(self.k or 0)
        if self.kind == "times_p":
            return SystemSpec.times_p(self.p or 0)
        return SystemSpec.identity()

    @model_validator(mode="after")
    def _check(self):
        try:
            self.build()
        except (ValueError, TypeError) as exc:
            raise PydanticCustomError("system", str(exc)) from None
        return self


class ObservableConfig(Strict):
    kind: Literal["trig", "indicator", "tabulated", "per_component"] = "trig"
    c0: float = 0.0
    terms: list[tuple[int, float, float]] = [(1, 1.0, 0.0)]
    intervals: list[tuple[Rational, Rational]] = []
    values: list[float] = []
    parts: list["ObservableConfig"] = []
    weight: Rational = "1/2"

    def build(self):
        from .ergolab import Observable
        from .torus import IntervalUnion

        if self.kind == "trig":
            return Observable.trig(self.c0, self.terms)
        if self.kind == "indicator":
            pairs = [(Fraction(lo), Fraction(hi)) for lo, hi in self.intervals]
            return Observable.indicator(IntervalUnion.from_pairs(pairs))
        if self.kind == "tabulated":
            return Observable.tabulated(self.values)
        if len(self.parts) != 2:
            raise ValueError("per_component needs two parts")
        return Observable.per_component(self.parts[0].build(), self.parts[1].build(),
                                        Fraction(self.weight))


class PrecisionConfig(Strict):
    work_bits: int = Field(128, ge=53, le=1 << 16)
    guard_bits: int = Field(40, ge=20, le=512)
    bit_cap: int = Field(1 << 26, ge=1 << 10)


# -- experiment parameter blocks ---------------------------------------------


class HitParams(Strict):
    sequence: SequenceConfig = SequenceConfig()
    target: TargetConfig
    A: SetConfig = SetConfig()
    y: PointConfig = PointConfig()
    N: int = Field(10**5, ge=1)
    seeds: int = Field(1, ge=1)


class LLNParams(Strict):
    sequence: SequenceConfig = SequenceConfig()
    target: TargetConfig
    grid: GridConfig = GridConfig()
    seeds: int = Field(100, ge=1)


class CorrParams(Strict):
    sequence: SequenceConfig = SequenceConfig()
    target: TargetConfig
    pairs: list[tuple[int, int]] = []
    random_cases: int = Field(0, ge=0)
    mc_samples: int = Field(0, ge=0)
    method: Literal["periods", "sweep"] = "periods"


class FourfoldParams(Strict):
    sequence: SequenceConfig = SequenceConfig()
    target: TargetConfig
    indices: list[tuple[int, int, int, int]] = []
    triples: list[tuple[int, int, int]] = []
    random_cases: int = Field(0, ge=0)
    mc_samples: int = Field(0, ge=0)


class BoundsParams(Strict):
    kind: Literal["cov", "fourfold", "triple"] = "cov"
    alpha: Rational = "2"
    a_values: list[Rational] = ["1/5", "3/10", "1/2"]
    fit_cases: int = Field(500, ge=1)
    fresh_cases: int = Field(500, ge=1)
    placement: Literal["anchored", "symmetric", "seeded_random", "split"] = "anchored"


class DimParams(Strict):
    A: SetConfig = SetConfig()
    window: tuple[int, int] = (10**3, 10**7)
    eta: float = Field(10**0.25, gt=1)


class WeightedParams(Strict):
    A: SetConfig = SetConfig(kind="squares")
    a: Rational = "1/5"
    gammas: list[Rational] = ["2/5", "1/5"]
    grid: GridConfig = GridConfig(points=[10**4, 10**5, 10**6, 10**7, 10**8])


class TransverseParams(Strict):
    A: SetConfig = SetConfig(kind="squares")
    sequence: SequenceConfig = SequenceConfig()
    target: TargetConfig
    window: tuple[int, int] = (10**4, 10**8)
    eta: float = Field(10**0.25, gt=1)
    seeds: int = Field(50, ge=1)
    lambda_cap: int = Field(10**6, ge=1)
    lambda_seeds: int = Field(1, ge=0)


class ErgodicParams(Strict):
    sequence: SequenceConfig = SequenceConfig()
    target: TargetConfig
    system: SystemConfig = SystemConfig()
    observable: ObservableConfig = ObservableConfig()
    x: PointConfig = PointConfig()
    M_grid: list[int] = [10, 100, 1000, 10**4]
    seeds: int = Field(20, ge=1)

    @model_validator(mode="after")
    def _check(self):
        g = self.M_grid
        if not g or g[0] < 1 or any(b <= a for a, b in zip(g, g[1:])):
            raise PydanticCustomError("grid", "M_grid must be strictly increasing positive integers")
        try:
            f = self.observable.build()
        except ValueError as exc:
            raise PydanticCustomError("observable", str(exc)) from None
        if (f.kind == "tabulated") != (self.system.kind == "cyclic"):
            raise PydanticCustomError("observable", "tabulated observables go with cyclic systems only")
        if f.kind == "tabulated" and len(f.values) != self.system.k:
            raise PydanticCustomError("observable", "tabulated observable needs one value per point")
        return self


class VprimeParams(Strict):
    sequence: SequenceConfig = SequenceConfig()
    target: TargetConfig
    b: Rational | None = None
    grid: GridConfig = GridConfig(points=[2**k for k in range(8, 15)])
    seeds: int = Field(100, ge=1)


class PresetParams(Strict):
    name: Literal["corollary-1.10", "lln-default", "Q1", "Q2"]
    seeds: int | None = Field(None, ge=1)


PARAMS = {"hit": HitParams, "lln": LLNParams, "corr": CorrParams, "fourfold": FourfoldParams,
          "bounds": BoundsParams, "dim": DimParams, "weighted": WeightedParams,
          "transverse": TransverseParams, "ergodic": ErgodicParams, "vprime": VprimeParams,
          "preset": PresetParams}


class ExperimentConfig(Strict):
    experiment: Literal["hit", "lln", "corr", "fourfold", "bounds", "dim", "weighted",
                        "transverse", "ergodic", "vprime", "preset"]
    params: dict = {}
    seed: int = Field(0, ge=0, lt=1 << 64)
    precision: PrecisionConfig = PrecisionConfig()
    output: str | None = None

    def typed_params(self):
        return PARAMS[self.experiment].model_validate(self.params)

    def resolved(self) -> dict:
        """The config with every default filled in, as plain JSON."""
        out = self.model_dump(mode="json")
        out["params"] = self.typed_params().model_dump(mode="json")
        return out


class ConfigError(ValueError):
    """Schema violation with field-path diagnostics."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def _diagnostics(exc: ValidationError, drop_prefix: tuple = ()) -> list[str]:
    out = []
    for err in exc.errors():
        loc = [str(p) for p in err["loc"] if not str(p).startswith("function-")]
        if tuple(loc[:len(drop_prefix)]) == drop_prefix:
            loc = loc[len(drop_prefix):]
        path = ".".join(loc)
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = "unknown field"
        out.append(f"{path} {msg}" if path else msg)
    return out


def load_config(data: dict) -> ExperimentConfig:
    """Validate a config dict, raising ConfigError with "path message" diagnostics."""
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_diagnostics(exc)) from None
    try:
        cfg.typed_params()
    except ValidationError as exc:
        raise ConfigError(_diagnostics(exc)) from None
    return cfg
