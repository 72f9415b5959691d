"""Turn term declarations into design matrices and penalty blocks.

Every smooth term is reparameterized at build time so its columns sum
to zero over the training rows: with c the column means, coefficients
are restricted to the null space of c via an orthonormal basis Z, and
the term contributes X Z with penalties Z' S Z.  This removes the
constant direction a spline basis shares with the intercept (cardinal
spline columns sum to one across each row), dropping one coefficient
per smooth.  The stored Z makes prediction reproduce the constraint
exactly.
"""

import numpy as np
from scipy import linalg

from . import basis as bas
from .model import Linear, Smooth


class BuiltTerm:
    """A term bound to its basis, constraint and penalty blocks."""

    def __init__(self, label, covariates, builder=None, Z=None,
                 penalties=(), lambda_idx=(), ncol=1, linear_var=None):
        self.label = label
        self.covariates = tuple(covariates)
        self.builder = builder
        self.Z = Z
        self.penalties = list(penalties)
        self.lambda_idx = list(lambda_idx)
        self.ncol = ncol
        self.linear_var = linear_var
        self.cols = None     # slice into the parameter design, set later

    @property
    def is_smooth(self):
        return self.builder is not None

    def design(self, data):
        if self.builder is None:
            if self.linear_var is None:
                return np.ones((_nrows(data), 1))
            return np.asarray(
                _column(data, self.linear_var), dtype=float)[:, None]
        X = self.builder.design(*(_column(data, v) for v in self.covariates))
        return X @ self.Z

    def to_dict(self):
        d = {"label": self.label, "covariates": list(self.covariates),
             "ncol": self.ncol, "lambda_idx": list(self.lambda_idx)}
        if self.builder is not None:
            d["basis"] = self.builder.to_dict()
            d["Z"] = self.Z.tolist()
            d["penalties"] = [S.tolist() for S in self.penalties]
        if self.linear_var is not None:
            d["linear"] = self.linear_var
        return d

    @classmethod
    def from_dict(cls, d):
        builder = Z = None
        pen = []
        if "basis" in d:
            builder = bas.basis_from_dict(d["basis"])
            Z = np.asarray(d["Z"])
            pen = [np.asarray(S) for S in d["penalties"]]
        return cls(d["label"], d["covariates"], builder=builder, Z=Z,
                   penalties=pen, lambda_idx=d["lambda_idx"],
                   ncol=d["ncol"], linear_var=d.get("linear"))


class ParamDesign:
    """Design matrix for one linked parameter, as a list of terms."""

    def __init__(self, name, terms):
        self.name = name
        self.terms = terms
        col = 0
        for t in terms:
            t.cols = slice(col, col + t.ncol)
            col += t.ncol
        self.ncol = col

    def design(self, data):
        return np.column_stack([t.design(data) for t in self.terms])

    def to_dict(self):
        return {"name": self.name,
                "terms": [t.to_dict() for t in self.terms]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], [BuiltTerm.from_dict(t) for t in d["terms"]])


def _nrows(data):
    try:
        return len(next(iter(data.values())))
    except AttributeError:
        return len(data)
    except StopIteration:
        raise ValueError("data has no columns, cannot infer the number "
                         "of rows") from None


def _column(data, name):
    try:
        col = data[name]
    except KeyError:
        raise KeyError(f"covariate {name!r} not found in data") from None
    return np.asarray(col, dtype=float)


def _build_basis(term, data, maxspline):
    if term.basis == "cr":
        return bas.CRBasis.from_data(_column(data, term.covariates[0]),
                                     k=term.k)
    if term.basis == "cc":
        return bas.CCBasis.from_data(_column(data, term.covariates[0]),
                                     k=term.k, period=term.period)
    if term.basis == "tp":
        return bas.TPBasis.from_data(_column(data, term.covariates[0]),
                                     _column(data, term.covariates[1]),
                                     k=term.k, maxspline=maxspline)
    if term.basis == "te":
        ks = term.k if isinstance(term.k, tuple) else (term.k, term.k)
        margins = []
        for v, kind, kk in zip(term.covariates, term.margins, ks):
            x = _column(data, v)
            if kind == "cr":
                margins.append(bas.CRBasis.from_data(x, k=kk))
            elif kind == "cc":
                margins.append(bas.CCBasis.from_data(x, k=kk,
                                                     period=term.period))
            else:
                raise ValueError(f"te margins must be cr or cc, got {kind!r}")
        return bas.TensorBasis(*margins)
    raise ValueError(f"unknown basis {term.basis!r}")


def build_param_design(name, terms, data, maxspline=2000, lambda_start=0):
    """Build one parameter's design; returns (ParamDesign, next lambda
    index)."""
    built = [BuiltTerm("(Intercept)", ())]
    lam = lambda_start
    for term in terms:
        if isinstance(term, Linear):
            built.append(BuiltTerm(term.label, (term.covariate,),
                                   linear_var=term.covariate))
            continue
        if not isinstance(term, Smooth):
            raise TypeError(f"unknown term type {type(term).__name__}")
        builder = _build_basis(term, data, maxspline)
        X = builder.design(*(_column(data, v) for v in term.covariates))
        c = X.mean(axis=0)
        Z = linalg.null_space(c[None, :])
        if Z.shape[1] != X.shape[1] - 1:
            raise ValueError(
                f"sum-to-zero constraint failed for {term.label}")
        pen = [Z.T @ S @ Z for S in builder.penalties()]
        pen = [0.5 * (S + S.T) for S in pen]
        idx = list(range(lam, lam + len(pen)))
        lam += len(pen)
        built.append(BuiltTerm(term.label, term.covariates, builder=builder,
                               Z=Z, penalties=pen, lambda_idx=idx,
                               ncol=Z.shape[1]))
    return ParamDesign(name, built), lam


def build_designs(spec, family, data, maxspline=2000):
    """Designs for every linked parameter; returns (designs, n_lambda)."""
    designs = []
    lam = 0
    for name, terms in zip(family.param_names, spec.terms_for(family.nparam)):
        pd_, lam = build_param_design(name, terms, data,
                                      maxspline=maxspline, lambda_start=lam)
        designs.append(pd_)
    return designs, lam
