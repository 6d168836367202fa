from pydantic_settings import BaseSettings
from typing import List
from pydantic import Field, computed_field
from pathlib import Path


class Settings(BaseSettings):
    orders_str: str = Field(
        default="3,5,7,9,11",
        alias="HARMONIC_ORDERS",
        description="Comma-separated harmonic orders solved after the fundamental"
    )
    power_flow_tolerance: float = Field(default=1e-8, gt=0, description="Per-unit voltage mismatch that ends the power flow")
    max_iterations: int = Field(default=100, ge=1, description="Power flow iteration cap")
    skin_effect: bool = Field(default=False, description="Scale branch resistance by sqrt(h) at harmonic orders")
    phi_include_fundamental: bool = Field(default=True, description="Start PHI sums at h=1 instead of h=2")
    sweep_workers: int = Field(default=4, ge=1, description="Thread pool size for sweep cells")
    order_workers: int = Field(default=1, ge=1, description="Thread pool size for per-order harmonic solves")
    csv_significant_digits: int = Field(default=9, ge=1, le=17, description="Significant digits written to CSV files")
    log_level: str = Field(default="WARN", description="Lowest log level written (DEBUG, INFO, WARN, ERROR)")
    fixtures_dir: Path = Field(
        default=Path(__file__).resolve().parent.parent / "fixtures",
        description="Directory searched for bundled feeders by name"
    )

    @computed_field
    @property
    def orders(self) -> List[int]:
        """Parse comma-separated harmonic orders into a list"""
        if not self.orders_str:
            return []
        return [int(order.strip()) for order in self.orders_str.split(",") if order.strip()]

    class Config:
        env_file = ".env"
        case_sensitive = False
        populate_by_name = True  # Allow both field name and alias


settings = Settings()
