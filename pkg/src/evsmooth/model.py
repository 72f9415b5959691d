"""Model specification: which terms enter each distribution parameter.

A model formula here is a list of term declarations per linked
parameter, in the family's parameter order.  Parameters omitted from
the specification get an intercept only; an intercept is always
included and never declared.
"""

from dataclasses import dataclass, field

from .families import make_family


@dataclass(frozen=True)
class Smooth:
    """Penalized smooth term.

    covariates: one name for cr/cc, two for tp/te.
    basis: "cr", "cc", "tp" or "te".
    k: basis dimension; for te, a pair (k1, k2).
    period: wrap length for cc (or the cc margin of a te term).
    margins: for te, the marginal basis kinds, default ("cr", "cr").
    """
    covariates: tuple
    basis: str = "cr"
    k: object = 10
    period: object = None
    margins: tuple = ("cr", "cr")

    def __post_init__(self):
        cov = tuple(self.covariates)
        object.__setattr__(self, "covariates", cov)
        need = 2 if self.basis in ("tp", "te") else 1
        if len(cov) != need:
            raise ValueError(
                f"{self.basis} smooth takes {need} covariate(s), got {cov}")
        if self.basis not in ("cr", "cc", "tp", "te"):
            raise ValueError(f"unknown basis {self.basis!r}")

    @property
    def label(self):
        tag = "te" if self.basis == "te" else "s"
        return f"{tag}({','.join(self.covariates)})"


@dataclass(frozen=True)
class Linear:
    """Unpenalized linear term in one covariate."""
    covariate: str

    @property
    def label(self):
        return self.covariate


def smooth(*covariates, basis="cr", k=10, period=None, margins=("cr", "cr")):
    return Smooth(tuple(covariates), basis=basis, k=k, period=period,
                  margins=tuple(margins))


def linear(covariate):
    return Linear(covariate)


@dataclass
class ModelSpec:
    """Declarative description of a model to fit.

    formulas: list of term lists, one per linked parameter in family
    order; trailing parameters may be omitted.  For censored responses
    give (lower, upper) column names via censor instead of response.
    pp_args: dict with keys group (column name), r (order statistics
    kept per group, -1 for all) and ny (intensity multiplier), required
    by the pp family.
    """
    family: str
    response: str = None
    formulas: list = field(default_factory=list)
    censor: tuple = None
    tau: float = None
    omega: float = None
    pp_args: dict = None

    def __post_init__(self):
        fam = self.make_family()
        if len(self.formulas) > fam.nparam:
            raise ValueError(
                f"{self.family} has {fam.nparam} parameters but "
                f"{len(self.formulas)} formulas were given")
        if self.family == "pp":
            if not self.pp_args or "group" not in self.pp_args:
                raise ValueError("pp family needs pp_args with a group column")
        if self.censor is not None:
            if self.response is not None:
                raise ValueError("give either response or censor, not both")
            if len(self.censor) != 2:
                raise ValueError("censor must name (lower, upper) columns")
            if not fam.supports_censoring:
                raise ValueError(
                    f"family {self.family} does not support censoring")
        elif self.response is None:
            raise ValueError("a response column is required")

    def make_family(self):
        return make_family(self.family, tau=self.tau, omega=self.omega)

    def terms_for(self, nparam):
        out = []
        for j in range(nparam):
            out.append(list(self.formulas[j]) if j < len(self.formulas)
                       else [])
        return out

    def to_dict(self):
        d = {"family": self.family}
        if self.response is not None:
            d["response"] = self.response
        if self.censor is not None:
            d["censor"] = list(self.censor)
        if self.tau is not None:
            d["tau"] = self.tau
        if self.omega is not None:
            d["omega"] = self.omega
        if self.pp_args is not None:
            d["pp"] = dict(self.pp_args)
        d["formulas"] = [[_term_to_dict(t) for t in terms]
                         for terms in self.formulas]
        return d

    @classmethod
    def from_dict(cls, d):
        fam = make_family(d["family"], tau=d.get("tau"), omega=d.get("omega"))
        raw = d.get("formulas", [])
        if isinstance(raw, dict):
            raw = [raw.get(name, []) for name in fam.param_names]
        formulas = [[_term_from_dict(t) for t in terms] for terms in raw]
        censor = d.get("censor")
        return cls(family=d["family"], response=d.get("response"),
                   formulas=formulas,
                   censor=tuple(censor) if censor else None,
                   tau=d.get("tau"), omega=d.get("omega"),
                   pp_args=d.get("pp"))


def _term_to_dict(t):
    if isinstance(t, Linear):
        return {"linear": t.covariate}
    d = {"smooth": list(t.covariates), "basis": t.basis, "k": t.k}
    if t.period is not None:
        d["period"] = t.period
    if t.basis == "te":
        d["margins"] = list(t.margins)
    return d


def _term_from_dict(d):
    if "linear" in d:
        return Linear(d["linear"])
    if "smooth" not in d:
        raise ValueError(f"cannot parse term {d!r}")
    k = d.get("k", 10)
    if isinstance(k, list):
        k = tuple(k)
    return Smooth(tuple(d["smooth"]), basis=d.get("basis", "cr"), k=k,
                  period=d.get("period"),
                  margins=tuple(d.get("margins", ("cr", "cr"))))
