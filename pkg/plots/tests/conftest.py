import pytest

CURVE_HEADER = "level,n,cumulative_masks,C,C_tilde,stderr"
SUMMARY_HEADER = "f,rho,level,plateau,plateau_over_std,tau,status"


@pytest.fixture
def curves_csv(tmp_path):
    rows = [CURVE_HEADER]
    for level in (0, 1):
        c0 = 1.0
        for n in range(0, 30):
            c = 0.2 + 0.8 * (0.85 ** (n * (level + 1)))
            ct = (c - 0.2) / 0.8
            rows.append(f"{level},{n},{n * 2},{c:.6g},{ct:.6g},0.01")
    path = tmp_path / "curves.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture
def summary_csv(tmp_path):
    rows = [SUMMARY_HEADER]
    for f in (0.125, 0.25, 0.5):
        for rho in (0.0625, 0.25):
            for level in (0, 3):
                tau = 100 * f * (1 + level) / rho
                over = 8.0 if (f < 0.3 and rho < 0.1) else 0.2
                rows.append(f"{f},{rho},{level},0.1,{over},{tau:.4g},ok")
    path = tmp_path / "summary.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture
def thresholds_json(tmp_path):
    path = tmp_path / "thresholds.json"
    path.write_text('{"mode": "finite", "s": 2, "f_per": 0.3327, "f_inv": 0.3614}')
    return path
