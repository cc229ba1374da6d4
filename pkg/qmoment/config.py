from functools import lru_cache

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# ================================ qmoment ====================================

# All tunable numbers live here. Environment variables use the QMOMENT_ prefix and
# "__" for nested values, e.g. QMOMENT_TOLERANCES__FLOW_TOL=1e-9.

# =============================================================================


class Tolerances(BaseModel):
    eig_tol: float = Field(1e-10, gt=0, description="Singular values / eigenvalues below this are zero")
    dedupe_tol: float = Field(1e-9, gt=0, description="Two critical values closer than this are the same")
    flow_tol: float = Field(1e-8, gt=0, description="Gradient residual that counts as critical")
    fd_step: float = Field(1e-6, gt=0, description="Central-difference step")
    construct_tol: float = Field(1e-12, gt=0, description="Norm / symmetry checks at construction")
    psd_slack: float = Field(1e-10, gt=0, description="Allowed negative eigenvalue of a density matrix")
    boundary_tol: float = Field(1e-9, gt=0, description="Kirwan polytope boundary band")
    match_tol: float = Field(1e-5, gt=0, description="Flow limit to critical value matching")
    commute_tol: float = Field(1e-9, gt=0, description="Commutator norm treated as zero")
    rank_rel_tol: float = Field(1e-8, gt=0, description="Relative singular value cut for numerical rank")


class FlowOptions(BaseModel):
    max_iter: int = Field(20000, ge=1)
    armijo_c: float = Field(1e-4, gt=0, lt=1)
    backtrack: float = Field(0.5, gt=0, lt=1)
    initial_step: float = Field(1.0, gt=0)
    min_step: float = Field(1e-14, gt=0)
    null_cone_threshold: float = Field(1e-8, gt=0, description="Infimum of |mu|^2 below which a state is semistable")


class WitnessOptions(BaseModel):
    restarts: int = Field(50, ge=1)
    max_iter: int = Field(5000, ge=1)
    accept_residual: float = Field(1e-7, gt=0)


class AtlasOptions(BaseModel):
    max_subsets: int = Field(2_000_000, ge=1, description="Budget on enumerated weight subsets")
    chunk_size: int = Field(50_000, ge=1)
    workers: int = Field(1, ge=1)
    find_witnesses: bool = True


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file='.env',
        env_file_encoding='utf-8',
        env_prefix='QMOMENT_',
        env_nested_delimiter='__',
        extra='ignore',
    )

    LOG_LEVEL: str = "WARNING"

    # Fixed default seed so identical invocations give identical output
    SEED: int = 20150601

    TOLERANCES: Tolerances = Tolerances()
    FLOW: FlowOptions = FlowOptions()
    WITNESS: WitnessOptions = WitnessOptions()
    ATLAS: AtlasOptions = AtlasOptions()


@lru_cache
def get_settings():
    return Settings()


settings = get_settings()
