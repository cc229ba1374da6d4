from enum import Enum
from math import comb, prod
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from qmoment.config import Tolerances, settings


def complex_to_pairs(values: np.ndarray) -> list:
    """Nested [re, im] lists, the wire convention for complex arrays."""
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [complex_to_pairs(row) for row in arr]


def pairs_to_complex(values: Any) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


# ============================== sectors and wire files ==============================


class SectorKind(str, Enum):
    distinguishable = "distinguishable"
    bosonic = "bosonic"
    fermionic = "fermionic"


class SectorSpec(BaseModel):
    """Particle sector. Distinguishable: dims = [N_1, ..., N_L]. Bosons/fermions: dims = [d, L]."""

    model_config = ConfigDict(frozen=True)

    kind: SectorKind = Field(..., description="distinguishable, bosonic or fermionic")
    dims: List[int] = Field(..., min_length=1, description="Local dimensions, or [d, L] for identical particles")

    @model_validator(mode="after")
    def check_dims(self) -> "SectorSpec":
        if any(n < 2 for n in self.dims):
            raise ValueError(f"all dims must be >= 2, got {self.dims}")
        if self.kind != SectorKind.distinguishable:
            if len(self.dims) != 2:
                raise ValueError("identical-particle sectors take dims = [d, L]")
            d, n_particles = self.dims
            if self.kind == SectorKind.fermionic and n_particles > d:
                raise ValueError(f"{n_particles} fermions do not fit into {d} modes")
        return self

    @property
    def indistinguishable(self) -> bool:
        return self.kind != SectorKind.distinguishable

    @property
    def n_slots(self) -> int:
        return self.dims[1] if self.indistinguishable else len(self.dims)

    @property
    def local_dims(self) -> Tuple[int, ...]:
        if self.indistinguishable:
            return (self.dims[0],) * self.dims[1]
        return tuple(self.dims)

    @property
    def embedded_dim(self) -> int:
        return prod(self.local_dims)

    @property
    def total_dim(self) -> int:
        if self.kind == SectorKind.bosonic:
            d, n = self.dims
            return comb(d + n - 1, n)
        if self.kind == SectorKind.fermionic:
            d, n = self.dims
            return comb(d, n)
        return self.embedded_dim

    @property
    def is_qubits(self) -> bool:
        return not self.indistinguishable and all(n == 2 for n in self.dims)

    @property
    def n_blocks(self) -> int:
        """Number of reduced one-particle blocks of the momentum map."""
        return 1 if self.indistinguishable else len(self.dims)


class StateFile(BaseModel):
    sector: SectorSpec
    amplitudes: List[Tuple[float, float]] = Field(..., min_length=1, description="[re, im] per amplitude")


class DensityFile(BaseModel):
    dims: List[int] = Field(..., min_length=1)
    matrix: List[List[Tuple[float, float]]] = Field(..., min_length=1)

    @field_validator("dims")
    @classmethod
    def check_dims(cls, dims: List[int]) -> List[int]:
        if any(n < 2 for n in dims):
            raise ValueError(f"all dims must be >= 2, got {dims}")
        return dims


# ============================== tensor-structured values ==============================


class PureState(BaseModel):
    """Unit vector over a sector. Identical particles are stored as the embedded d^L tensor."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sector: SectorSpec
    amplitudes: np.ndarray

    @field_validator("amplitudes", mode="before")
    @classmethod
    def as_vector(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=complex).reshape(-1)
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def check_invariants(self) -> "PureState":
        tol = settings.TOLERANCES.construct_tol
        if self.amplitudes.size != self.sector.embedded_dim:
            raise ValueError(f"expected {self.sector.embedded_dim} amplitudes, got {self.amplitudes.size}")
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("amplitudes must be finite")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > tol * 10:
            raise ValueError(f"state is not normalized (norm {norm:.3e})")
        if self.sector.indistinguishable and self.sector.n_slots > 1:
            tensor = self.tensor
            sign = -1.0 if self.sector.kind == SectorKind.fermionic else 1.0
            for a in range(self.sector.n_slots - 1):
                swapped = np.swapaxes(tensor, a, a + 1)
                if np.max(np.abs(swapped - sign * tensor)) > tol * 10:
                    raise ValueError(f"{self.sector.kind.value} state lacks exchange symmetry")
        return self

    @field_serializer("amplitudes")
    def dump_amplitudes(self, amplitudes: np.ndarray) -> list:
        return complex_to_pairs(amplitudes)

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.sector.local_dims)

    @property
    def n_slots(self) -> int:
        return self.sector.n_slots

    def to_file(self) -> StateFile:
        return StateFile(sector=self.sector, amplitudes=complex_to_pairs(self.amplitudes))


class DensityMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dims: List[int]
    matrix: np.ndarray

    @field_validator("matrix", mode="before")
    @classmethod
    def as_matrix(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=complex)
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def check_invariants(self) -> "DensityMatrix":
        tol = settings.TOLERANCES
        size = prod(self.dims)
        if self.matrix.shape != (size, size):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match dims {self.dims}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("matrix entries must be finite")
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > tol.construct_tol * 10:
            raise ValueError("density matrix is not Hermitian")
        trace = np.trace(self.matrix).real
        if abs(trace - 1.0) > tol.construct_tol * 10:
            raise ValueError(f"density matrix has trace {trace:.12g}, expected 1")
        if np.min(np.linalg.eigvalsh(self.matrix)) < -tol.psd_slack:
            raise ValueError("density matrix has a negative eigenvalue")
        return self

    @field_serializer("matrix")
    def dump_matrix(self, matrix: np.ndarray) -> list:
        return complex_to_pairs(matrix)

    def to_file(self) -> DensityFile:
        return DensityFile(dims=self.dims, matrix=complex_to_pairs(self.matrix))


class LocalOperator(BaseModel):
    """One square factor per subsystem; neither unitarity nor unit determinant is required."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    factors: List[np.ndarray] = Field(..., min_length=1)

    @field_validator("factors", mode="before")
    @classmethod
    def as_matrices(cls, value: Any) -> List[np.ndarray]:
        out = []
        for factor in value:
            arr = np.array(factor, dtype=complex)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ValueError(f"local factor must be square, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("local factor has non-finite entries")
            arr.flags.writeable = False
            out.append(arr)
        return out

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)


# ============================== momentum map ==============================


class MomentumPoint(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    blocks: List[np.ndarray]

    @field_serializer("blocks")
    def dump_blocks(self, blocks: List[np.ndarray]) -> list:
        return [complex_to_pairs(b) for b in blocks]


class SpectraPoint(BaseModel):
    lambdas: List[List[float]] = Field(..., description="Nonincreasing spectrum of each shifted block")

    @property
    def qubit_lambdas(self) -> List[float]:
        """Largest shifted eigenvalue per block, the per-qubit coordinate in [0, 1/2]."""
        return [block[0] for block in self.lambdas]

    @property
    def norm_sq(self) -> float:
        return 0.5 * sum(x * x for block in self.lambdas for x in block)


class PolytopeMembership(str, Enum):
    inside = "inside"
    boundary = "boundary"
    outside = "outside"


class ReducedSpaceCase(str, Enum):
    interior = "interior"
    boundary_i = "boundary_i"
    boundary_ii = "boundary_ii"
    boundary_iii = "boundary_iii"


class ReducedSpaceReport(BaseModel):
    case: ReducedSpaceCase
    k: Optional[int] = Field(None, description="Number of saturated coordinates for cases (i) and (iii)")
    dim: int = Field(..., ge=0)


# ============================== critical atlas ==============================


class Weight(BaseModel):
    model_config = ConfigDict(frozen=True)

    coords: Tuple[float, ...]
    basis_index: int = Field(..., ge=0)


class CriticalValue(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    beta: List[float]
    norm_sq: float
    support: List[int] = Field(default_factory=list, description="Basis indices of weights on the beta hyperplane")
    z_basis: List[int] = Field(default_factory=list)
    realizable: Optional[bool] = Field(None, description="None until a witness search ran")
    witness: Optional[PureState] = None
    residual: Optional[float] = None


class CriticalAtlas(BaseModel):
    n_qubits: int
    values: List[CriticalValue]
    subsets_checked: int
    complete: bool = True


class CriticalCheck(BaseModel):
    critical: bool
    eigenvalue: float
    residual: float


# ============================== SLOCC ==============================


class StratumAssignment(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    beta: Optional[CriticalValue] = None
    matched: bool = False
    limit_state: PureState
    limit_spectra: SpectraPoint
    iterations: int
    final_norm_mu_sq: float
    residual: float
    converged: bool
    semistable: bool
    trace: List[float] = Field(default_factory=list, description="|mu|^2 after each accepted step")


class NullConeStatus(str, Enum):
    semistable = "semistable"
    unstable = "unstable"


class NullConeVerdict(BaseModel):
    status: NullConeStatus
    infimum: float
    iterations: int
    beta: Optional[List[float]] = None
    stratum: Optional[StratumAssignment] = None
    converged: bool = True


class PolytopeSample(BaseModel):
    points: List[SpectraPoint]
    min_norm_sq: float
    rejected: int = Field(0, description="Draws dropped for falling outside the Kirwan polytope")


class Slocc3Class(str, Enum):
    sep = "Sep"
    bisep_a = "BiSep_A|BC"
    bisep_b = "BiSep_B|AC"
    bisep_c = "BiSep_C|AB"
    w = "W"
    ghz = "GHZ"


# ============================== LU equivalence ==============================


class LUVerdictKind(str, Enum):
    equivalent = "equivalent"
    not_equivalent = "not_equivalent"
    undecided_necessary_passed = "undecided_necessary_passed"


class LUVerdict(BaseModel):
    verdict: LUVerdictKind
    evidence: str
    spectra_a: List[List[float]] = Field(default_factory=list)
    spectra_b: List[List[float]] = Field(default_factory=list)
    invariants: Dict[str, List[float]] = Field(default_factory=dict)


# ============================== mixed states ==============================


class GroupFactor(str, Enum):
    full = "full"
    trivial = "trivial"


class GroupSpec(BaseModel):
    factors: List[GroupFactor] = Field(..., min_length=1)
    dims: List[int] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_factors(self) -> "GroupSpec":
        if len(self.factors) != len(self.dims):
            raise ValueError("one factor selection per subsystem")
        if all(f == GroupFactor.trivial for f in self.factors):
            raise ValueError("at least one factor must be SU(N)")
        return self

    @classmethod
    def full(cls, dims: List[int]) -> "GroupSpec":
        return cls(factors=[GroupFactor.full] * len(dims), dims=dims)

    @classmethod
    def first_only(cls, dims: List[int]) -> "GroupSpec":
        return cls(factors=[GroupFactor.full] + [GroupFactor.trivial] * (len(dims) - 1), dims=dims)

    @property
    def dim(self) -> int:
        return sum(n * n - 1 for f, n in zip(self.factors, self.dims) if f == GroupFactor.full)

    @property
    def rank(self) -> int:
        return sum(n - 1 for f, n in zip(self.factors, self.dims) if f == GroupFactor.full)


class OrbitReport(BaseModel):
    orbit_dim: int
    stabilizer_dim: int
    omega_rank: int
    degeneracy_D: int
    euler_chi: int
    is_symplectic: bool
    is_cq: bool
    is_cc: bool


# ============================== CLI ==============================


class RunConfig(BaseModel):
    command: str
    args: Dict[str, Any] = Field(default_factory=dict)
    seed: int
    tolerances: Tolerances
    output: Optional[str] = None


class CriticalStateRow(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    state: PureState
    expected_diagonals: List[Tuple[float, float]]
    expected_entropy: Tuple[int, int] = Field(..., description="E(phi) as numerator, denominator")
