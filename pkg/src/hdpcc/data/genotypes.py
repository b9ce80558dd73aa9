"""Genotype and environment containers plus their text formats."""
import csv
from dataclasses import dataclass

import numpy as np

from ..errors import (CompletenessError, ConflictError, DomainError, ParseError,
                      ShapeError, ValidationError)

GENO_HEADER = "#hdpcc-geno v1"


@dataclass
class GenotypeTensor:
    """Alleles for every (individual, gene, locus), padded to L = max L_j.

    Individuals are stored controls first then cases, each block sorted by ID.
    `alleles` has shape (N, J, L, 2); entries at r >= L_j are zero padding and
    never enter observed likelihood terms.
    """
    ids: list
    group: np.ndarray
    genes: list
    Lj: np.ndarray
    alleles: np.ndarray

    def __post_init__(self):
        self.group = np.asarray(self.group, dtype=np.int64)
        self.Lj = np.asarray(self.Lj, dtype=np.int64)
        self.alleles = np.asarray(self.alleles, dtype=np.int8)
        N, J, L, two = self.alleles.shape
        if two != 2 or len(self.ids) != N or len(self.genes) != J or self.Lj.shape != (J,):
            raise ShapeError("genotype tensor dimensions disagree")
        if np.any(self.Lj < 1) or self.Lj.max() != L:
            raise ShapeError("need 1 <= L_j and L = max L_j")
        if np.any((self.alleles != 0) & (self.alleles != 1)):
            raise DomainError("alleles must be 0 or 1")
        if np.any(np.diff(self.group) < 0) or not np.all(np.isin(self.group, (0, 1))):
            raise ShapeError("individuals must be ordered controls then cases")
        self.alleles[:, ~self.locus_mask] = 0

    @classmethod
    def from_arrays(cls, alleles, Lj, group, ids=None, genes=None):
        N, J = alleles.shape[:2]
        if ids is None:
            w = len(str(N))
            ids = [f"i{n:0{w}d}" for n in range(N)]
        if genes is None:
            genes = [f"g{j + 1}" for j in range(J)]
        return cls(list(ids), group, list(genes), Lj, alleles)

    @property
    def N(self):
        return len(self.ids)

    @property
    def J(self):
        return len(self.genes)

    @property
    def L(self):
        return self.alleles.shape[2]

    @property
    def Nk(self):
        return (int(np.sum(self.group == 0)), int(np.sum(self.group == 1)))

    @property
    def locus_mask(self):
        return np.arange(self.L)[None, :] < self.Lj[:, None]

    @property
    def mask(self):
        """Observed flag per (i, j, r)."""
        return np.broadcast_to(self.locus_mask, (self.N, self.J, self.L))

    def group_index(self, k):
        return np.flatnonzero(self.group == k)

    def allele_sums(self):
        """x1 + x2 per (i, j, r), zero on padding."""
        return self.alleles.sum(axis=3).astype(np.int64)

    def equals(self, other):
        return (self.ids == other.ids and self.genes == other.genes
                and np.array_equal(self.group, other.group)
                and np.array_equal(self.Lj, other.Lj)
                and np.array_equal(self.alleles, other.alleles))


def _int_field(tok, what, line):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"{what} is not an integer: {tok!r}", line) from None


def load_genotypes(path) -> GenotypeTensor:
    rows = {}
    groups = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    header_seen = False
    for n, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s:
            continue
        if not header_seen:
            if s != GENO_HEADER:
                raise ParseError(f"expected header {GENO_HEADER!r}", n)
            header_seen = True
            continue
        if s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) != 6:
            raise ParseError(f"expected 6 fields, got {len(tok)}", n)
        ind, g, gene, r, a1, a2 = tok
        g = _int_field(g, "group", n)
        if g not in (0, 1):
            raise DomainError(f"line {n}: group must be 0 or 1, got {g}")
        r = _int_field(r, "locus_index", n)
        if r < 1:
            raise DomainError(f"line {n}: locus_index must be >= 1, got {r}")
        a = (_int_field(a1, "allele1", n), _int_field(a2, "allele2", n))
        for v in a:
            if v not in (0, 1):
                raise DomainError(f"line {n}: allele value {v} not in {{0,1}}")
        if groups.setdefault(ind, g) != g:
            raise ConflictError(f"line {n}: individual {ind} listed in both groups")
        key = (ind, gene, r)
        if key in rows:
            raise ConflictError(f"line {n}: duplicate entry for individual {ind}, "
                                f"gene {gene}, locus {r}")
        rows[key] = a
    if not header_seen:
        raise ParseError("empty genotype file", 1)
    if not rows:
        raise CompletenessError("genotype file has no data rows")

    genes = sorted({key[1] for key in rows})
    Lj = np.zeros(len(genes), dtype=np.int64)
    gpos = {gname: j for j, gname in enumerate(genes)}
    for (_, gene, r) in rows:
        Lj[gpos[gene]] = max(Lj[gpos[gene]], r)
    ids = sorted((ind for ind in groups if groups[ind] == 0)) + \
        sorted((ind for ind in groups if groups[ind] == 1))
    ipos = {ind: i for i, ind in enumerate(ids)}
    L = int(Lj.max())
    alleles = np.zeros((len(ids), len(genes), L, 2), dtype=np.int8)
    seen = np.zeros((len(ids), len(genes), L), dtype=bool)
    for (ind, gene, r), a in rows.items():
        i, j = ipos[ind], gpos[gene]
        alleles[i, j, r - 1] = a
        seen[i, j, r - 1] = True
    mask = np.arange(L)[None, :] < Lj[:, None]
    missing = np.argwhere(mask[None] & ~seen)
    if missing.size:
        i, j, r = missing[0]
        raise CompletenessError(f"individual {ids[i]} lacks gene {genes[j]} locus {r + 1} "
                                f"({len(missing)} missing entries)")
    group = np.array([groups[ind] for ind in ids])
    return GenotypeTensor(ids, group, genes, Lj, alleles)


def write_genotypes(tensor: GenotypeTensor, path):
    with open(path, "w") as fh:
        fh.write(GENO_HEADER + "\n")
        for i, ind in enumerate(tensor.ids):
            g = tensor.group[i]
            for j, gene in enumerate(tensor.genes):
                for r in range(tensor.Lj[j]):
                    a1, a2 = tensor.alleles[i, j, r]
                    fh.write(f"{ind}\t{g}\t{gene}\t{r + 1}\t{a1}\t{a2}\n")


@dataclass
class EnvMatrix:
    """Covariates E_ik in the tensor's individual order, shape (N, d)."""
    E: np.ndarray
    group_of: np.ndarray

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=float)
        if self.E.ndim == 1:
            self.E = self.E[:, None]
        self.group_of = np.asarray(self.group_of, dtype=np.int64)
        if self.E.shape[0] != self.group_of.shape[0] or self.E.shape[1] < 1:
            raise ShapeError("environment matrix needs one row per individual and d >= 1")
        means = []
        for k in (0, 1):
            rows = self.E[self.group_of == k]
            means.append(rows.mean(axis=0) if len(rows) else np.zeros(self.d))
        self.group_mean = np.array(means)
        self.grand_mean = 0.5 * (self.group_mean[0] + self.group_mean[1])

    @property
    def d(self):
        return self.E.shape[1]

    def group(self, k):
        return self.E[self.group_of == k]

    def equals(self, other):
        return np.array_equal(self.E, other.E) and np.array_equal(self.group_of, other.group_of)


def load_environment(path, tensor: GenotypeTensor) -> EnvMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty environment file", 1) from None
        header = [h.strip() for h in header]
        if header[:2] != ["individual_id", "group"] or len(header) < 3:
            raise ParseError("header must be individual_id,group,e1,...,ed", 1)
        d = len(header) - 2
        vals = {}
        for n, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d + 2:
                raise ShapeError(f"line {n}: expected d={d} covariates, got {len(row) - 2}")
            ind = row[0].strip()
            try:
                g = int(row[1])
                e = [float(c) for c in row[2:]]
            except ValueError:
                raise ParseError("non-numeric group or covariate", n) from None
            if ind in vals:
                raise ConflictError(f"line {n}: duplicate row for individual {ind}")
            vals[ind] = (g, e)
    pos = {ind: i for i, ind in enumerate(tensor.ids)}
    extra = sorted(set(vals) - set(pos))
    if extra:
        raise ValidationError(f"environment rows for unknown individuals: {extra[:5]}")
    missing = [ind for ind in tensor.ids if ind not in vals]
    if missing:
        raise CompletenessError(f"no environment row for individuals {missing[:5]}")
    E = np.empty((tensor.N, d))
    for ind, (g, e) in vals.items():
        i = pos[ind]
        if g != tensor.group[i]:
            raise ConflictError(f"individual {ind}: group {g} disagrees with genotype file")
        E[i] = e
    return EnvMatrix(E, tensor.group)


def write_environment(env: EnvMatrix, tensor: GenotypeTensor, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["individual_id", "group"] + [f"e{c + 1}" for c in range(env.d)])
        for i, ind in enumerate(tensor.ids):
            w.writerow([ind, int(tensor.group[i])] + [repr(float(v)) for v in env.E[i]])
