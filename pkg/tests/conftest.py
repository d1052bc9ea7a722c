import sys

import numpy as np
import pytest

from pebg.core import prepare
from pebg.data import ingest
from pebg.synthetic import SyntheticSpec, generate_synthetic

TINY_CSV = """student_id,question_id,skill_ids,correct,response_time_ms,question_type
u1,q1,s1,1,1000,choice
u1,q2,s1;s2,0,3000,fillin
u1,q3,s2,1,2000,choice
u2,q1,s1,0,1500,choice
u2,q3,s2,1,,choice
u2,q2,s1;s2,1,2500,fillin
u3,q4,s1,1,800,choice
u3,q5,s2,0,4000,fillin
u3,q1,s1,1,1200,choice
""".splitlines()


@pytest.fixture
def tiny_lines():
    return list(TINY_CSV)


@pytest.fixture
def tiny_dataset(tiny_lines):
    return ingest(tiny_lines)


@pytest.fixture
def tiny_data(tiny_dataset):
    """5 questions, 2 skills; small enough for full-pair oracles."""
    return prepare(tiny_dataset, tiny_dataset)


@pytest.fixture(scope="session")
def planted():
    """The 2-cluster, 20-question, 4-skill planted instance."""
    spec = SyntheticSpec(num_skills=4, questions_per_skill=5, skill_overlap=0.5, clusters=2,
                         num_students=100, records_per_student=20)
    ds, truth = generate_synthetic(spec, 0)
    return ds, truth, prepare(ds, ds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    RESULTS = module.RESULTS
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
