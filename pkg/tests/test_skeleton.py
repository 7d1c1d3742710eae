import logging
import random

import pytest

from conftest import make_dataset
from mockskel.cli import RunConfig, choose_models, run_pipeline
from mockskel.errors import SkeletonSyntaxError, UnknownAttributeError
from mockskel.features import Role
from mockskel.learners import classify, train_c45, train_part
from mockskel.prep import Removal
from mockskel.skeleton import (
    PLACEHOLDER,
    MockSkeleton,
    TargetEntry,
    UnpredictedTarget,
    build_skeleton,
    emit_skeleton,
    parse_skeleton,
)


@pytest.fixture(scope="module")
def trained_skeleton(small_synth_log):
    config = RunConfig(input="x", jobs=1)
    result = run_pipeline(small_synth_log, config)
    chosen = choose_models(result, config.learners)
    removed = {r.attribute for r in result.removals}
    skeleton = build_skeleton(
        service_name="tasks",
        seed=1,
        inputs=tuple(a.name for a in result.table.inputs() if a.name not in removed),
        chosen=chosen,
        removals=result.removals,
        config=config.extraction_config(),
        profile=result.profile,
    )
    return skeleton, result


class TestEmission:
    def test_tree_section_renders_branch_lines(self):
        rows = [["GET", "200"]] * 5 + [["DELETE", "204"]] * 5
        ds = make_dataset(rows, ["method"])
        tree = train_c45(ds)
        skeleton = MockSkeleton(
            service_name="s",
            seed=1,
            inputs=("method",),
            targets={"statusCode": TargetEntry(model=tree, learner="c45")},
            unpredicted=(),
        )
        text = emit_skeleton(skeleton)
        assert "target statusCode tree:" in text
        assert "  method = DELETE: 204 (5)" in text

    def test_unpredicted_section(self):
        skeleton = MockSkeleton(
            service_name="s",
            seed=1,
            inputs=("method",),
            targets={},
            unpredicted=(
                UnpredictedTarget("responsejson:message.text", "high-cardinality"),
            ),
        )
        text = emit_skeleton(skeleton)
        assert "unpredicted:" in text
        assert (
            '  responsejson:message.text  reason=high-cardinality  default="<EDIT-ME>"'
            in text
        )
        reparsed = parse_skeleton(text)
        assert reparsed.targets == {}
        assert reparsed.unpredicted[0].default == PLACEHOLDER

    def test_unary_target_keeps_value_as_default(self):
        removals = (
            Removal("responseheader:Server", Role.TARGET, "unary", 1, value="nginx"),
        )
        skeleton = build_skeleton("s", 1, ("method",), {}, removals)
        text = emit_skeleton(skeleton)
        assert 'responseheader:Server  reason=unary  default="nginx"' in text


class TestRoundTrip:
    def test_emit_parse_preserves_classification(self, trained_skeleton, small_synth_log):
        skeleton, result = trained_skeleton
        text = emit_skeleton(skeleton)
        reparsed = parse_skeleton(text)
        assert set(reparsed.targets) == set(skeleton.targets)
        table = result.table
        rows = [table.row_mapping(i) for i in range(len(table.instances))]
        for name, entry in skeleton.targets.items():
            again = reparsed.targets[name]
            assert again.origin == "learned"
            for row in rows:
                assert classify(entry.model, row) == classify(again.model, row)

    def test_round_trip_under_unseen_values(self, trained_skeleton):
        # missing-branch routing survives the text form
        skeleton, _ = trained_skeleton
        reparsed = parse_skeleton(emit_skeleton(skeleton))
        rng = random.Random(1)
        for name, entry in skeleton.targets.items():
            for _ in range(200):
                instance = {
                    attr: rng.choice(["true", "false", "GET", "weird", "no-exist"])
                    for attr in skeleton.inputs
                }
                assert classify(entry.model, instance) == classify(
                    reparsed.targets[name].model, instance
                )

    def test_double_round_trip_is_stable(self, trained_skeleton):
        skeleton, _ = trained_skeleton
        once = emit_skeleton(parse_skeleton(emit_skeleton(skeleton)))
        twice = emit_skeleton(parse_skeleton(once))
        assert once == twice

    def test_coverage_targets_plus_unpredicted(self, trained_skeleton):
        skeleton, result = trained_skeleton
        all_targets = {a.name for a in result.table.targets()}
        predicted = set(skeleton.targets)
        unpredicted = {u.attribute for u in skeleton.unpredicted}
        assert predicted | unpredicted == all_targets
        assert not predicted & unpredicted

    def test_metrics_comments_survive(self, trained_skeleton):
        skeleton, _ = trained_skeleton
        reparsed = parse_skeleton(emit_skeleton(skeleton))
        for name, entry in reparsed.targets.items():
            assert entry.learner in ("c45", "ripper", "part")
            assert "cv-accuracy" in entry.metrics


class TestHandEdits:
    def test_hand_prepended_rule_wins(self, trained_skeleton):
        skeleton, _ = trained_skeleton
        text = emit_skeleton(skeleton)
        lines = text.splitlines()
        marker = next(
            i for i, line in enumerate(lines) if line.startswith("target statusCode")
        )
        lines.insert(marker + 1, "  (method = DELETE) => statusCode=503")
        edited = parse_skeleton("\n".join(lines) + "\n")
        entry = edited.targets["statusCode"]
        assert entry.origin == "edited"
        prediction = classify(
            entry.model,
            {name: "no-exist" for name in skeleton.inputs} | {"method": "DELETE"},
        )
        assert prediction == "503"

    def test_hand_edit_requires_rules_section(self, trained_skeleton, caplog):
        # unknown class values are warned about but accepted
        skeleton, _ = trained_skeleton
        text = emit_skeleton(skeleton)
        lines = text.splitlines()
        marker = next(
            i for i, line in enumerate(lines) if line.startswith("target statusCode")
        )
        lines.insert(marker + 1, "  (method = DELETE) => statusCode=599")
        with caplog.at_level(logging.WARNING):
            parse_skeleton("\n".join(lines) + "\n")
        assert any("599" in record.message for record in caplog.records)

    def test_edits_are_localized(self, trained_skeleton, small_synth_log):
        skeleton, result = trained_skeleton
        text = emit_skeleton(skeleton)
        lines = text.splitlines()
        marker = next(
            i for i, line in enumerate(lines) if line.startswith("target statusCode")
        )
        lines.insert(marker + 1, "  (method = DELETE) => statusCode=503")
        edited = parse_skeleton("\n".join(lines) + "\n")
        table = result.table
        rows = [table.row_mapping(i) for i in range(len(table.instances))]
        for name, entry in skeleton.targets.items():
            if name == "statusCode":
                continue
            assert edited.targets[name].origin == "learned"
            for row in rows[:100]:
                assert classify(entry.model, row) == classify(
                    edited.targets[name].model, row
                )

    def test_edited_origin_survives_reemission(self, trained_skeleton):
        skeleton, _ = trained_skeleton
        text = emit_skeleton(skeleton)
        lines = text.splitlines()
        marker = next(
            i for i, line in enumerate(lines) if line.startswith("target statusCode")
        )
        lines.insert(marker + 1, "  (method = DELETE) => statusCode=503")
        edited = parse_skeleton("\n".join(lines) + "\n")
        normalized = parse_skeleton(emit_skeleton(edited))
        assert normalized.targets["statusCode"].origin == "edited"
        prediction = classify(
            normalized.targets["statusCode"].model,
            {name: "no-exist" for name in skeleton.inputs} | {"method": "DELETE"},
        )
        assert prediction == "503"

    def test_unknown_attribute_rejected(self, trained_skeleton):
        skeleton, _ = trained_skeleton
        text = emit_skeleton(skeleton)
        lines = text.splitlines()
        marker = next(
            i for i, line in enumerate(lines) if line.startswith("target statusCode")
        )
        lines.insert(marker + 1, "  (uriPathToken99 = x) => statusCode=200")
        with pytest.raises(UnknownAttributeError) as exc:
            parse_skeleton("\n".join(lines) + "\n")
        assert "uriPathToken99" in str(exc.value)


class TestSyntaxErrors:
    def test_error_reports_line_number(self):
        text = "service: s\ninputs:\n  method\ntarget statusCode tree:\n  ???\n"
        with pytest.raises(SkeletonSyntaxError) as exc:
            parse_skeleton(text)
        assert exc.value.line == 5

    def test_missing_inputs_section(self):
        with pytest.raises(SkeletonSyntaxError):
            parse_skeleton("service: s\n")

    def test_rules_need_default(self):
        text = (
            "service: s\ninputs:\n  method\n"
            "target statusCode rules:\n  (method = GET) => statusCode=200 (3)\n"
        )
        with pytest.raises(SkeletonSyntaxError):
            parse_skeleton(text)

    def test_mixed_sibling_attributes_rejected(self):
        text = (
            "service: s\ninputs:\n  method\n  everCreated\n"
            "target statusCode tree:\n"
            "  method = GET: 200 (3)\n"
            "  everCreated = true: 404 (2)\n"
        )
        with pytest.raises(SkeletonSyntaxError):
            parse_skeleton(text)

    def test_digest_mismatch_warns_but_parses(self, trained_skeleton, caplog):
        skeleton, _ = trained_skeleton
        text = emit_skeleton(skeleton).replace(
            f"schema-digest: {skeleton.computed_digest()}", "schema-digest: deadbeef"
        )
        with caplog.at_level(logging.WARNING):
            parsed = parse_skeleton(text)
        assert parsed.service_name == skeleton.service_name
        assert any("digest" in r.message for r in caplog.records)


class TestQuotedValues:
    def test_values_with_spaces_round_trip(self):
        rows = [["Bearer a b", "200"]] * 6 + [["no-exist", "401"]] * 6
        ds = make_dataset(rows, ["requestheader:Authorization"])
        model = train_part(ds)
        skeleton = MockSkeleton(
            service_name="s",
            seed=1,
            inputs=("requestheader:Authorization",),
            targets={"statusCode": TargetEntry(model=model, learner="part")},
            unpredicted=(),
        )
        reparsed = parse_skeleton(emit_skeleton(skeleton))
        again = reparsed.targets["statusCode"].model
        assert classify(again, {"requestheader:Authorization": "Bearer a b"}) == "200"
        assert classify(again, {"requestheader:Authorization": "no-exist"}) == "401"
