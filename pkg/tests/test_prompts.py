import pytest

from vrskit.prompts import available_prompts, load_prompt
from vrskit.responses import AksOption, Task, parse


def test_all_templates_listed_and_loadable():
    names = available_prompts()
    assert names == sorted(
        ["aks_judge", "keyframe_reselect", "keyframe_select", "ktg_ground", "video_description"]
    )
    for name in names:
        assert load_prompt(name).strip()


def test_unknown_template():
    with pytest.raises(KeyError):
        load_prompt("nope")


def test_slots_format_cleanly():
    filled = load_prompt("aks_judge").format(
        query="the dog that jumps", video_description="a park scene"
    )
    assert "the dog that jumps" in filled
    filled = load_prompt("keyframe_reselect").format(
        query="q", video_description="d", rejected_frames=[3, 7]
    )
    assert "[3, 7]" in filled


def test_templates_state_the_parser_contract():
    # a response following the judge template's instructions must parse
    judge = load_prompt("aks_judge")
    assert "<think>" in judge and "<answer>" in judge
    assert parse("<think>scene, target, decision</think><answer>A</answer>", Task.AKS).payload is AksOption.A

    ground = load_prompt("ktg_ground")
    for key in ("bbox_2d", "point_2d", "840"):
        assert key in ground
