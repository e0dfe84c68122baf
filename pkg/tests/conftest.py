from pathlib import Path

import pytest

from pertkit.models import EDSRParams, TransmonParams

FIXTURE_DIR = Path(__file__).parent / "fixtures"


def load_params(path=FIXTURE_DIR / "params.txt"):
    values = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, raw = line.partition("=")
        values[key.strip()] = float(raw.strip())
    return values


@pytest.fixture(scope="session")
def fixture_params():
    return load_params()


@pytest.fixture(scope="session")
def edsr_params(fixture_params):
    p = fixture_params
    return EDSRParams(
        omega=p["edsr.omega"],
        omega_z=p["edsr.omega_z"],
        omega_d=p["edsr.omega_d"],
        b_sl=p["edsr.b_sl"],
        e0=p["edsr.e0"],
        hbar=p["edsr.hbar"],
        n_max=int(p["edsr.n_max"]),
    )


@pytest.fixture(scope="session", params=["transmon1", "transmon2"])
def transmon_params(request, fixture_params):
    p = fixture_params
    tag = request.param
    return TransmonParams(
        omega_t=p[f"{tag}.omega_t"],
        omega_r=p[f"{tag}.omega_r"],
        alpha=p[f"{tag}.alpha"],
        g=p[f"{tag}.g"],
        n_t_max=8,
        n_r_max=8,
    )
