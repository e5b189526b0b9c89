# design.py

import math
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from errors import DimensionMismatch, RetriesExhausted, ValidationError, WorkBudgetExceeded
from model import CONSTRUCTION_STREAM, RNG_ALGORITHM, check_seed, child_seed
from utils import load_json, save_json

DESIGN_FORMAT_VERSION = 1
DEFAULT_WORK_BUDGET = 10 ** 9
DEFAULT_MAX_RETRIES = 20


class Verification(Enum):
    UNVERIFIED = "unverified"
    VERIFIED_DISJUNCT = "verified_disjunct"
    FAILED_VERIFICATION = "failed_verification"


def check_level(L):
    if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 1:
        raise ValidationError(f"L must be a positive integer, got {L!r}")
    return int(L)


def _check_population(n, minimum=2):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < minimum:
        raise ValidationError(f"n must be an integer >= {minimum}, got {n!r}")
    return int(n)


def _pack(bits):
    return np.packbits(np.asarray(bits, dtype=bool), axis=-1)


@dataclass(frozen=True)
class OutcomeVector:
    """Y_j = 1 iff test j met an excellent element."""
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool).reshape(-1))

    def __len__(self):
        return self.bits.shape[0]


@dataclass(frozen=True, eq=False)
class TestDesign:
    """
    An m x n incidence matrix, one packed row per test pool.

    Rows are numpy.packbits output (big-endian bit order): bit 7 of byte 0
    is element 1. Padding bits past n are always zero.
    """
    __test__ = False

    n: int
    rows: np.ndarray
    L: int
    q: Optional[float] = None
    seed: Optional[int] = None
    attempt: Optional[int] = None
    verified: Verification = Verification.UNVERIFIED
    verified_level: Optional[int] = None
    failure_bound: Optional[float] = None
    sizing: Optional[str] = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.uint8, copy=True)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] != (self.n + 7) // 8:
            raise DimensionMismatch(f"rows of shape {rows.shape} do not pack {self.n} columns")
        if self.n % 8 and np.any(rows[:, -1] & np.uint8(0xFF >> (self.n % 8))):
            raise ValidationError("nonzero padding bits past column n")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.verified is Verification.VERIFIED_DISJUNCT and self.verified_level is None:
            object.__setattr__(self, "verified_level", self.L)

    @classmethod
    def from_matrix(cls, matrix, L=1, **metadata):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=bool))
        return cls(n=matrix.shape[1], rows=_pack(matrix), L=check_level(L), **metadata)

    @property
    def m(self):
        return self.rows.shape[0]

    def matrix(self):
        return np.unpackbits(self.rows, axis=1, count=self.n).astype(bool)

    def column(self, index):
        """Membership of element `index` (1-based) in every row."""
        if not 1 <= index <= self.n:
            raise DimensionMismatch(f"element {index} outside 1..{self.n}")
        byte, bit = divmod(index - 1, 8)
        return (self.rows[:, byte] >> np.uint8(7 - bit)) & np.uint8(1) == 1

    def row_members(self, j):
        return set((np.flatnonzero(np.unpackbits(self.rows[j], count=self.n)) + 1).tolist())

    def with_zeroed_column(self, index):
        matrix = self.matrix()
        matrix[:, index - 1] = False
        return replace(self, rows=_pack(matrix), verified=Verification.UNVERIFIED,
                       verified_level=None, failure_bound=None)

    @property
    def is_verified(self):
        return self.verified is Verification.VERIFIED_DISJUNCT

    def metadata(self):
        meta = {
            "n": self.n,
            "m": self.m,
            "L": self.L,
            "q": self.q,
            "seed": self.seed,
            "attempt": self.attempt,
            "verified": self.verified.value,
            "verified_level": self.verified_level,
            "sizing": self.sizing,
            "rng": RNG_ALGORITHM,
        }
        if self.failure_bound is not None:
            meta["failure_bound"] = self.failure_bound
        return meta

    def to_dict(self):
        doc = {"version": DESIGN_FORMAT_VERSION}
        doc.update(self.metadata())
        doc["rows"] = [row.tobytes().hex() for row in self.rows]
        return doc

    @classmethod
    def from_dict(cls, doc, work_budget=DEFAULT_WORK_BUDGET):
        """
        Rebuild a design from its JSON document.

        A stored verified_disjunct claim is re-checked against the rows when the
        check fits in `work_budget`, and dropped to unverified when it does not.
        """
        try:
            if doc.get("version") != DESIGN_FORMAT_VERSION:
                raise ValidationError(f"unsupported design version {doc.get('version')!r}")
            n, m = int(doc["n"]), int(doc["m"])
            width = (n + 7) // 8
            rows = [bytes.fromhex(text) for text in doc["rows"]]
            if len(rows) != m or any(len(row) != width for row in rows):
                raise DimensionMismatch(f"expected {m} rows of {width} bytes")
            design = cls(
                n=n,
                rows=np.frombuffer(b"".join(rows), dtype=np.uint8).reshape(m, width),
                L=check_level(doc["L"]),
                q=doc.get("q"),
                seed=doc.get("seed"),
                attempt=doc.get("attempt"),
                verified=Verification(doc.get("verified", Verification.UNVERIFIED.value)),
                verified_level=doc.get("verified_level"),
                failure_bound=doc.get("failure_bound"),
                sizing=doc.get("sizing"),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"malformed design document: {e}") from e
        return _recheck_stored_claim(design, work_budget)

    def save(self, file_path):
        save_json(self.to_dict(), file_path)

    @classmethod
    def load(cls, file_path, work_budget=DEFAULT_WORK_BUDGET):
        return cls.from_dict(load_json(file_path), work_budget)


def identity_design(n):
    """I_n: row i tests element i alone; (n-1)-disjunct."""
    return TestDesign.from_matrix(np.eye(n, dtype=bool), L=max(1, n - 1))


def rho(L):
    """Probability that one Bernoulli(1/(L+1)) row separates an element from L others."""
    L = check_level(L)
    return (1.0 / (L + 1)) * (L / (L + 1)) ** L


def proof_constant(L):
    return (L + 3) / rho(L)


def tests_required(L, n):
    """m_L(n) = ceil(C_L ln n)."""
    n = _check_population(n)
    return math.ceil(proof_constant(L) * math.log(n))


def union_bound_size(L, n):
    """Smallest m with (L+1) n^{L+1} e^{-rho_L m} <= 1/n."""
    n = _check_population(n)
    return math.ceil(((L + 2) * math.log(n) + math.log(L + 1)) / rho(L))


def failure_bound(L, n, m):
    """Union bound on the probability that a random design is not L-disjunct."""
    log_bound = math.log(L + 1) + (L + 1) * math.log(n) - rho(L) * m
    return 1.0 if log_bound >= 0 else math.exp(log_bound)


def verification_work(n, L):
    """Row-checks a full verification performs: n * C(n-1, min(L, n-1))."""
    return n * math.comb(n - 1, min(L, n - 1))


def _random_rows(n, m, q, seed_sequence):
    rng = np.random.Generator(np.random.PCG64(seed_sequence))
    rows = np.empty((m, (n + 7) // 8), dtype=np.uint8)
    for j in range(m):
        rows[j] = _pack(rng.random(n) < q)
    return rows


def random_design(n, m, q, seed, L=None):
    """
    An m x n matrix with i.i.d. Bernoulli(q) entries, deterministic per seed.

    L defaults to the level q is tuned for, round(1/q) - 1 (at least 1).
    """
    n = _check_population(n, minimum=1)
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 1:
        raise ValidationError(f"m must be a positive integer, got {m!r}")
    if not 0 < q < 1:
        raise ValidationError(f"q must lie in (0, 1), got {q!r}")
    seed = check_seed(seed)
    if L is None:
        L = max(1, int(round(1.0 / q)) - 1)
    rows = _random_rows(n, int(m), q, np.random.SeedSequence(seed))
    return TestDesign(n=n, rows=rows, L=check_level(L), q=float(q), seed=seed)


def _column_masks(design):
    # One Python int per column; bit j set when row j contains the column.
    packed = np.packbits(design.matrix().T, axis=1)
    return [int.from_bytes(col.tobytes(), "big") for col in packed]


def disjunct_check(design, L, work_budget=DEFAULT_WORK_BUDGET):
    """
    Decide L-disjunctness and count the (i, S) leaves examined.

    Only |S| = min(L, n-1) is enumerated: a row separating i from S also
    separates i from every subset of S. The enumeration is a depth-first walk
    that abandons a branch as soon as no row containing i survives.

    Returns:
        tuple: (is_disjunct, leaves_checked)

    Raises:
        WorkBudgetExceeded: when n * C(n-1, L) exceeds work_budget.
    """
    L = check_level(L)
    n = design.n
    required = verification_work(n, L)
    if required > work_budget:
        logging.error(f"Verification of n={n}, L={L} needs {required} row-checks (budget {work_budget})")
        raise WorkBudgetExceeded(required, work_budget)

    size = min(L, n - 1)
    masks = _column_masks(design)
    checked = 0

    for i in range(n):
        others = masks[:i] + masks[i + 1:]
        stack = [(0, 0, masks[i])]
        while stack:
            start, depth, remaining = stack.pop()
            if remaining == 0:
                logging.debug(f"Column {i + 1} is covered by other columns at depth {depth}")
                return False, checked
            if depth == size:
                checked += 1
                continue
            for idx in range(start, len(others) - (size - depth) + 1):
                stack.append((idx + 1, depth + 1, remaining & ~others[idx]))
    return True, checked


def is_disjunct(design, L, work_budget=DEFAULT_WORK_BUDGET):
    return disjunct_check(design, L, work_budget)[0]


def verify_design(design, L, work_budget=DEFAULT_WORK_BUDGET):
    """Return the design re-labelled with the outcome of a full L-disjunct check."""
    ok, checked = disjunct_check(design, L, work_budget)
    logging.info(f"Design n={design.n} m={design.m}: {L}-disjunct={ok} after {checked} checks")
    if ok:
        return replace(design, verified=Verification.VERIFIED_DISJUNCT, verified_level=L), checked
    return replace(design, verified=Verification.FAILED_VERIFICATION, verified_level=None), checked


def _recheck_stored_claim(design, work_budget):
    if not design.is_verified:
        return design
    L = check_level(design.verified_level or design.L)
    if verification_work(design.n, L) > work_budget:
        logging.warning(f"Cannot re-check the stored {L}-disjunct claim for n={design.n} within budget {work_budget}; loading it as unverified")
        return replace(design, verified=Verification.UNVERIFIED, verified_level=None)
    checked, _ = verify_design(design, L, work_budget)
    if not checked.is_verified:
        logging.warning(f"Stored design n={design.n} m={design.m} claims {L}-disjunct but is not")
    return checked


def design_size(L, n):
    """Return (m, sizing): the smaller of the union-bound and C_L ln n sizes."""
    union = union_bound_size(L, n)
    simplified = tests_required(L, n)
    if union <= simplified:
        return union, "union_bound"
    return simplified, "proof_constant"


def build_verified_design(n, L, seed, max_retries=DEFAULT_MAX_RETRIES,
                          work_budget=DEFAULT_WORK_BUDGET, q=None):
    """
    Draw random Bernoulli(q) designs until one is L-disjunct.

    Attempt a uses construction stream a of `seed`. When a full check would exceed
    the work budget the first draw is returned unverified, carrying the union
    bound on its failure probability. The `attempt` field records how many
    retries were consumed.

    Raises:
        RetriesExhausted: when max_retries draws all fail verification.
    """
    n = _check_population(n)
    L = check_level(L)
    seed = check_seed(seed)
    q = 1.0 / (L + 1) if q is None else q
    if not 0 < q < 1:
        raise ValidationError(f"q must lie in (0, 1), got {q!r}")
    m, sizing = design_size(L, n)
    bound = failure_bound(L, n, m)
    common = dict(n=n, L=L, q=q, seed=seed, sizing=sizing, failure_bound=bound)

    if verification_work(n, L) > work_budget:
        logging.warning(f"n={n}, L={L} is above the verification budget; returning an unverified design (failure bound {bound:.3g})")
        return TestDesign(rows=_random_rows(n, m, q, child_seed(seed, 0, CONSTRUCTION_STREAM)), attempt=0, **common)

    for attempt in range(max_retries):
        design = TestDesign(rows=_random_rows(n, m, q, child_seed(seed, attempt, CONSTRUCTION_STREAM)), attempt=attempt, **common)
        if is_disjunct(design, L, work_budget):
            logging.info(f"Built {L}-disjunct design n={n} m={m} ({sizing}) after {attempt} retries")
            return replace(design, verified=Verification.VERIFIED_DISJUNCT, verified_level=L)
        logging.debug(f"Attempt {attempt} for n={n}, L={L} is not disjunct")
    logging.error(f"Gave up on a {L}-disjunct design for n={n} after {max_retries} attempts")
    raise RetriesExhausted(max_retries, L)


def decode_compatible(design, outcomes):
    """
    The compatible set: elements every one of whose tests came back positive.

    Args:
        design (TestDesign): The applied design.
        outcomes (OutcomeVector or array-like): One result per row.

    Returns:
        set: Compatible element labels (1-based); may be empty.
    """
    bits = outcomes.bits if isinstance(outcomes, OutcomeVector) else np.asarray(outcomes, dtype=bool).reshape(-1)
    if bits.shape[0] != design.m:
        raise DimensionMismatch(f"{bits.shape[0]} outcomes for a design with {design.m} rows")
    negative = design.rows[~bits]
    if negative.shape[0] == 0:
        return set(range(1, design.n + 1))
    excluded = np.unpackbits(np.bitwise_or.reduce(negative, axis=0), count=design.n)
    return set((np.flatnonzero(excluded == 0) + 1).tolist())
