from pathlib import Path

import pytest

from hmmldpc.code import CodeParameters, LdpcCode, build_code

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def code128() -> LdpcCode:
    return LdpcCode.load(FIXTURES / "code_n128_s1.json")


@pytest.fixture(scope="session")
def code512() -> LdpcCode:
    return build_code(CodeParameters.from_frame_bits(512), 1)
