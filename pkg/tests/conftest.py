import pytest

from meritmatch.core import Applicant, School


def mk_applicant(aid: int, score: float, n_schools: int = 3, birth: int = 0) -> Applicant:
    return Applicant(
        id=aid,
        birth_prefecture=birth,
        score=score,
        utility=(0.0,) * n_schools,
        outside_option=0.0,
    )


def mk_schools(*capacities: int) -> list[School]:
    # prestige strictly decreasing in id; hosts are arbitrary valid prefectures
    return [
        School(id=i + 1, prefecture_id=0, capacity=c, prestige=10.0 - i)
        for i, c in enumerate(capacities)
    ]


@pytest.fixture
def xyz_instance():
    """Three schools with one seat each; z's list is truncated to [2, 3]."""
    from meritmatch.mechanisms import PreferenceList

    schools = mk_schools(1, 1, 1)
    applicants = [
        mk_applicant(1, 100.0),
        mk_applicant(2, 90.0),
        mk_applicant(3, 80.0),
    ]
    prefs = [
        PreferenceList(applicant_id=1, ranked=(1, 2, 3)),
        PreferenceList(applicant_id=2, ranked=(1, 2, 3)),
        PreferenceList(applicant_id=3, ranked=(2, 3)),
    ]
    return schools, applicants, prefs
