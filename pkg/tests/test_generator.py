"""Tests for the constraint-satisfaction section generator."""

import pytest

from level_synth.core.sprites import default_catalog
from level_synth.core.trace import TraceMeta, is_duplicate
from level_synth.errors import ValidationError
from level_synth.evaluation.sweep import sweep
from level_synth.generation.generator import (
    PartialSection,
    SectionGenerator,
    add_according_to_closest_connection,
    coexist_probability,
    dedup_sections,
    generate_all,
    get_next_required_edge_type,
    get_next_type_for_nearest_N,
    is_terminal,
)
from level_synth.model.builder import build_style_model
from level_synth.model.nodes import (
    DNode,
    EdgeEntry,
    EdgeProbabilityTable,
    GNode,
    LNode,
    ModelProvenance,
    NNode,
    Relation,
    ShapePair,
    SNode,
    StyleModel,
)
from level_synth.pipeline.config import GenerationParams, SweepParams
from tests.helpers import make_frame, sections_from_frames

CATALOG = default_catalog()
GROUND, BLOCK, BARK, COIN = (CATALOG.id_of(n) for n in ("ground", "block", "bark", "coin"))


def _row(**counts):
    return tuple(counts.get(name, 0) for name in CATALOG.names)


def _pair(sprite_type, anchor, relations=(), cells=((0, 0),)):
    g = GNode(sprite_type=sprite_type, cells=cells, anchor=anchor, source_section="t@0")
    rels = tuple(
        Relation(target_type=t, vec_corner=v, vec_center=(float(v[0]), float(v[1])))
        for t, v in relations
    )
    return ShapePair(g=g, d=DNode(relations=rels))


def _manual_model(s_specs, n_rows):
    """StyleModel from (sprite_type, pairs, table entries) specs, one L node."""
    s_nodes = []
    for s_id, (sprite_type, pairs, entries) in enumerate(s_specs):
        table = EdgeProbabilityTable(
            max_distance=10.0,
            total=sum(e[3] for e in entries),
            entries=tuple(EdgeEntry(*e) for e in entries),
        )
        s_nodes.append(SNode(id=s_id, sprite_type=sprite_type, members=tuple(pairs), table=table))
    ids = tuple(f"t@{i}" for i in range(len(n_rows)))
    return StyleModel(
        catalog=CATALOG,
        meta=TraceMeta(),
        s_nodes=tuple(s_nodes),
        l_nodes=(LNode(id=0, s_nodes=tuple(range(len(s_nodes))), n_rows=n_rows, section_ids=ids),),
        n_node=NNode(rows=n_rows, section_ids=ids),
        originals=(make_frame([(BARK, 2, 5), (COIN, 5, 5)]),),
        max_distance=10.0,
        provenance=ModelProvenance(section_ids=ids, rng_seed=0),
    )


def _bark_coin_model(n_row=None, bark_to_coin=0.8):
    """A bark that wants a coin 3 tiles right, and a coin that points back."""
    bark = _pair(BARK, (2, 5), [(COIN, (3, 0))])
    coin = _pair(COIN, (5, 5), [(BARK, (-3, 0))])
    return _manual_model(
        [
            (BARK, [bark], [(BARK, COIN, 30, 4, bark_to_coin), (BARK, GROUND, 80, 1, 0.2)]),
            (COIN, [coin], [(COIN, BARK, 30, 1, 1.0)]),
        ],
        (n_row or _row(bark=1, coin=1),),
    )


def _placed(model, *placements):
    section = PartialSection.empty(model)
    for ref, anchor in placements:
        section = section.add(ref, model.s_node(ref[0]).members[ref[1]], anchor)
    return section


def test_nearest_n_on_empty_section():
    model = build_style_model(
        sections_from_frames([make_frame([(BARK, x, 3) for x in range(5)])]), CATALOG
    )
    assert get_next_type_for_nearest_N(PartialSection.empty(model), model) == (BARK, 5)


def test_nearest_n_picks_closest_row():
    frames = [
        make_frame([(BARK, x, 3) for x in range(10)]),
        make_frame([(BARK, 0, 3), (BARK, 1, 3), (COIN, 5, 1), (COIN, 8, 1)]),
    ]
    model = build_style_model(sections_from_frames(frames), CATALOG)
    section = PartialSection(width=16, height=14, counts=_row(bark=3))
    assert get_next_type_for_nearest_N(section, model) == (COIN, 2)
    met = PartialSection(width=16, height=14, counts=_row(bark=10))
    assert get_next_type_for_nearest_N(met, model)[1] <= 0


def test_required_edge_lookup():
    model = _bark_coin_model()
    section = _placed(model, ((0, 0), (2, 5)))
    assert get_next_required_edge_type(section, 0.8, model) == COIN
    assert get_next_required_edge_type(section, 0.5, model) == COIN
    assert get_next_required_edge_type(section, 0.9, model) is None
    assert get_next_required_edge_type(section, 1.0, model) is None


def test_required_edge_satisfied_within_tolerance():
    model = _bark_coin_model()
    exact = _placed(model, ((0, 0), (2, 5)), ((1, 0), (5, 5)))
    assert get_next_required_edge_type(exact, 0.5, model) is None
    near = _placed(model, ((0, 0), (2, 5)), ((1, 0), (6, 6)))
    assert get_next_required_edge_type(near, 0.5, model, match_tolerance=1) is None
    assert get_next_required_edge_type(near, 0.5, model, match_tolerance=0) == BARK


def test_is_terminal_cases():
    model = _bark_coin_model()
    assert not is_terminal(_placed(model, ((0, 0), (2, 5))), 0.5, model)
    assert is_terminal(_placed(model, ((0, 0), (2, 5)), ((1, 0), (5, 5))), 0.5, model)
    stray_coin = _placed(model, ((0, 0), (2, 5)), ((1, 0), (12, 10)))
    assert not is_terminal(stray_coin, 0.5, model)


def _ground_and_block_model(targets):
    ground = _pair(GROUND, (0, 13))
    block = _pair(BLOCK, (8, 8), [(GROUND, v) for v in targets])
    return _manual_model(
        [(GROUND, [ground], []), (BLOCK, [block], [])],
        (_row(ground=4, block=1),),
    )


def test_coexist_probability_fraction_of_candidate_relations():
    model = _ground_and_block_model([(1, 0), (5, 0), (9, 0), (9, 9)])
    one = _placed(model, ((0, 0), (1, 0)))
    assert coexist_probability(one, (1, 0), model, anchor=(0, 0)) == pytest.approx(0.25)

    ground = ((0, 0), (1, 0)), ((0, 0), (5, 0)), ((0, 0), (9, 0))
    five = _placed(model, *ground, ((0, 0), (3, 7)), ((0, 0), (12, 12)))
    assert coexist_probability(five, (1, 0), model, anchor=(0, 0)) == pytest.approx(0.75)


def test_coexist_probability_edge_cases():
    model = _ground_and_block_model([(1, 0), (5, 0)])
    section = _placed(model, ((0, 0), (1, 0)))
    assert coexist_probability(PartialSection.empty(model), (1, 0), model) == 1.0
    assert coexist_probability(section, (0, 0), model) == 1.0
    assert coexist_probability(section, (1, 0), model, anchor=(0, 0)) == pytest.approx(0.5)
    assert coexist_probability(section, (1, 0), model, anchor=(0, 1)) == pytest.approx(0.5)
    assert coexist_probability(section, (1, 0), model, anchor=(0, 1), match_tolerance=0) == 0.0


def test_seed_placed_at_source_anchor():
    model = _bark_coin_model()
    seeded = add_according_to_closest_connection(PartialSection.empty(model), (1, 0), model)
    assert seeded.placements[-1].anchor == (5, 5)


def test_anchor_follows_relation_to_placed_shape():
    coin = _pair(COIN, (5, 2))
    block = _pair(BLOCK, (8, 8), [(COIN, (5, 2))])
    model = _manual_model([(COIN, [coin], []), (BLOCK, [block], [])], (_row(coin=1, block=1),))
    section = _placed(model, ((0, 0), (5, 2)))
    placed = add_according_to_closest_connection(section, (1, 0), model)
    assert placed.placements[-1].anchor == (0, 0)


def test_anchor_prefers_most_probable_relation():
    coin = _pair(COIN, (10, 0))
    ground = _pair(GROUND, (13, 5))
    block = _pair(BLOCK, (8, 8), [(COIN, (5, 0)), (COIN, (1, 0)), (GROUND, (4, 5))])
    entries = [
        (BLOCK, COIN, 50, 18, 0.9),
        (BLOCK, COIN, 10, 1, 0.05),
        (BLOCK, GROUND, 64, 1, 0.05),
    ]
    model = _manual_model(
        [(COIN, [coin], []), (GROUND, [ground], []), (BLOCK, [block], entries)],
        (_row(coin=1, ground=1, block=1),),
    )
    section = _placed(model, ((0, 0), (10, 0)), ((1, 0), (13, 5)))
    placed = add_according_to_closest_connection(section, (2, 0), model)
    assert placed.placements[-1].anchor == (5, 0)
    assert coexist_probability(section, (2, 0), model) == pytest.approx(1 / 3)


def test_tied_relations_prefer_the_anchor_linking_most_shapes():
    coin = _pair(COIN, (10, 0))
    ground = _pair(GROUND, (13, 5))
    block = _pair(BLOCK, (8, 8), [(COIN, (5, 0)), (COIN, (1, 0)), (GROUND, (4, 5))])
    model = _manual_model(
        [(COIN, [coin], []), (GROUND, [ground], []), (BLOCK, [block], [])],
        (_row(coin=1, ground=1, block=1),),
    )
    section = _placed(model, ((0, 0), (10, 0)), ((1, 0), (13, 5)))
    placed = add_according_to_closest_connection(section, (2, 0), model)
    assert placed.placements[-1].anchor == (9, 0)


def test_blocked_anchor_abandons_branch():
    coin = _pair(COIN, (5, 2))
    wall = _pair(GROUND, (0, 0), cells=((0, 0), (1, 0), (0, 1), (1, 1)))
    block = _pair(BLOCK, (8, 8), [(COIN, (5, 2))])
    model = _manual_model(
        [(COIN, [coin], []), (GROUND, [wall], []), (BLOCK, [block], [])],
        (_row(coin=1, ground=4, block=1),),
    )
    section = _placed(model, ((0, 0), (5, 2)), ((1, 0), (0, 0)))
    assert add_according_to_closest_connection(section, (2, 0), model) is None


def test_single_shape_model_reproduces_itself():
    frame = make_frame([(GROUND, x, 13) for x in range(3)])
    model = build_style_model(sections_from_frames([frame]), CATALOG)
    raw = generate_all(model, GenerationParams(dedup=False))
    assert raw.raw_count == 1
    assert raw.raw[0].instances == model.originals[0].instances
    assert generate_all(model).sections == []


def test_reconstructs_original_then_dedups_it():
    model = _bark_coin_model()
    result = generate_all(model, GenerationParams(p_E=0.01, p_C=0.99))
    assert [s.instances for s in result.raw] == [model.originals[0].instances]
    assert result.sections == []
    assert not result.truncated


def test_required_edge_overrides_met_counts():
    model = _bark_coin_model(n_row=_row(bark=1))
    loose = generate_all(model, GenerationParams(p_E=0.9, p_C=0.5, dedup=False))
    strict = generate_all(model, GenerationParams(p_E=0.5, p_C=0.5, dedup=False))
    bark_only = make_frame([(BARK, 2, 5)]).instances
    both = model.originals[0].instances
    assert {s.instances for s in loose.raw} == {bark_only, both}
    assert {s.instances for s in strict.raw} == {both}


def test_p_c_of_one_never_expands():
    model = _bark_coin_model()
    result = generate_all(model, GenerationParams(p_C=1.0, dedup=False))
    assert result.raw == []
    assert result.expansions == 2


def test_provenance_and_order():
    model = _bark_coin_model(n_row=_row(bark=1))
    result = generate_all(model, GenerationParams(p_E=0.9, p_C=0.5, dedup=False, rng_seed=3))
    keys = [s.instances for s in result.raw]
    assert keys == sorted(keys)
    for section in result.raw:
        assert set(section.provenance) == {"seed_pair", "p_E", "p_C", "rng_seed", "trace_hash"}
        assert section.provenance["rng_seed"] == 3


def test_unknown_l_node_rejected():
    with pytest.raises(ValidationError):
        SectionGenerator(_bark_coin_model(), l_node_id=5)


def test_output_cap_is_reported():
    model = _bark_coin_model(n_row=_row(bark=1))
    result = generate_all(model, GenerationParams(p_E=0.9, p_C=0.5, dedup=False, max_outputs=1))
    assert result.raw_count == 1
    assert result.output_cap_hit and result.truncated


def test_dedup_against_originals_and_earlier_outputs():
    model = _bark_coin_model(n_row=_row(bark=1))
    raw = generate_all(model, GenerationParams(p_E=0.9, p_C=0.5, dedup=False)).raw
    kept = dedup_sections(raw + raw, model.originals)
    assert [s.instances for s in kept] == [make_frame([(BARK, 2, 5)]).instances]


def _three_shape_model():
    frame = make_frame([(GROUND, x, 13) for x in range(4)] + [(BLOCK, 6, 10), (COIN, 6, 8)])
    return build_style_model(sections_from_frames([frame]), CATALOG)


def test_three_shape_section_closure():
    model = _three_shape_model()
    result = generate_all(model, GenerationParams(p_E=0.01, p_C=0.4, dedup=False))
    assert not result.truncated
    assert [s.instances for s in result.raw] == [model.originals[0].instances]


def test_second_shape_needs_half_its_relations_matched():
    # each shape relates to two others, so one placed shape matches half
    model = _three_shape_model()
    result = generate_all(model, GenerationParams(p_E=0.01, p_C=0.5, dedup=False))
    assert result.raw == []
    assert result.expansions == len(SectionGenerator(model).seeds())


def test_unreachable_required_edge_ends_branch():
    bark = _pair(BARK, (14, 5), [(COIN, (3, 0))])
    model = _manual_model([(BARK, [bark], [(BARK, COIN, 30, 1, 0.8)])], (_row(bark=1),))
    generator = SectionGenerator(model, GenerationParams(p_E=0.5, dedup=False))
    assert generator.run().raw == []
    assert generator.dead_ends == 1
    assert generate_all(model, GenerationParams(p_E=0.9, dedup=False)).raw_count == 1


def test_treetop_sweep_finishes_untruncated(treetop_model):
    params = SweepParams(p_C_values=[0.5, 0.6, 0.7, 0.8, 0.9], p_E_values=[0.05, 0.1])
    result = sweep(treetop_model, params, rng_seed=1)
    assert len(result.rows) == 7
    assert not any(row.truncated for row in result.rows)


def test_emitted_sections_are_novel(small_treetop_model):
    result = generate_all(small_treetop_model, GenerationParams(p_E=0.1, p_C=0.8))
    for i, section in enumerate(result.sections):
        assert not any(is_duplicate(section.frame, o) for o in small_treetop_model.originals)
        assert not any(is_duplicate(section.frame, e.frame) for e in result.sections[:i])


def test_raising_p_c_shrinks_outputs(small_treetop_model):
    low = generate_all(small_treetop_model, GenerationParams(p_C=0.8, dedup=False))
    high = generate_all(small_treetop_model, GenerationParams(p_C=0.95, dedup=False))
    assert not low.truncated
    assert {s.instances for s in high.raw} <= {s.instances for s in low.raw}


def test_generation_is_deterministic(small_treetop_model):
    params = GenerationParams(p_E=0.1, p_C=0.8)
    a = generate_all(small_treetop_model, params)
    b = generate_all(small_treetop_model, params)
    assert [s.instances for s in a.sections] == [s.instances for s in b.sections]
    assert [s.provenance for s in a.sections] == [s.provenance for s in b.sections]
