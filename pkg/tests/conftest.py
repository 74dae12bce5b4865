import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

SHAKESPEARE = Path(os.environ.get("DISTILL_AUDIT_SHAKESPEARE", "/root/data/tinyshakespeare.txt"))


@pytest.fixture(scope="session")
def shakespeare_path():
    if not SHAKESPEARE.is_file():
        pytest.skip(f"Tiny Shakespeare not found at {SHAKESPEARE}")
    return SHAKESPEARE


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def minimal_blob_config(out_dir, **extra):
    """One teacher, two students, one alpha, KD + RCD + SIDDO on small blobs."""
    from distill_audit.harness import config_from_dict

    data = {
        "dataset": {"n_train": 300, "n_test": 120, "n_features": 6, "n_classes": 4},
        "model": {"hidden": [16]},
        "train": {"steps": 40, "teacher_steps": 60, "batch_size": 32},
        "teacher_seeds": [0],
        "student_seeds": [10, 11],
        "alphas": [0.5],
        "output_dir": str(out_dir),
    }
    for key, value in extra.items():
        data[key] = {**data.get(key, {}), **value} if isinstance(value, dict) else value
    return config_from_dict(data)


TOY_TEXT = ("the cat sat on the mat. then the other one went there.\n"
            "a bat and a rat ran at the hat; that is all.\n") * 60


@pytest.fixture
def toy_corpus(tmp_path):
    path = tmp_path / "toy.txt"
    path.write_text(TOY_TEXT)
    return path


def minimal_char_config(out_dir, corpus_path, **extra):
    from distill_audit.harness import config_from_dict

    data = {
        "dataset": {"kind": "chars", "path": str(corpus_path), "eval_blocks": 4},
        "model": {"kind": "gpt", "preset": "tiny"},
        "train": {"steps": 3, "teacher_steps": 4, "batch_size": 4},
        "teacher_seeds": [0],
        "student_seeds": [10, 11],
        "alphas": [0.9],
        "adversarial": {"gen_chars": 60, "n_prompts": 3, "prompt_len": 8},
        "output_dir": str(out_dir),
    }
    for key, value in extra.items():
        data[key] = {**data.get(key, {}), **value} if isinstance(value, dict) else value
    return config_from_dict(data)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
