import pytest

MINIMAL_TOML = """
[design]
p_T = 0.3
eps1 = 0.1
eps2 = 0.1
num_doses = 5

[search]
alpha = 0.3
beta = 0.2
n_upper = 45
calib_trials = 120
power_trials = 120
root_seed = 5

[grid]
half_effects = [0.1]
alphas = [0.1, 0.3]
n_values = [30, 45]
simulate_trials = 3
"""


@pytest.fixture
def minimal_toml():
    return MINIMAL_TOML


@pytest.fixture
def config_file(tmp_path):
    def write(text=MINIMAL_TOML, name="run.toml"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return write
