import pytest

from neuroloop.adaptation import (
    ALL_STRATEGIES,
    AdaptationCatalogue,
    AdaptationStrategy,
    ConfigIdAllocator,
    load_selector_vocabulary,
    resolve,
    validate_catalogue,
)
from neuroloop.errors import ConfigurationError
from neuroloop.rl import Action, Attribute, Layout, StrategyKind


@pytest.fixture(scope="module")
def catalogue():
    return AdaptationCatalogue.load()


class TestStrategy:
    def test_action_mapping_covers_all_seven(self):
        strategies = [AdaptationStrategy.from_action(a) for a in Action]
        assert len(set(strategies)) == 7
        assert AdaptationStrategy.from_action(Action.NO_ADAPTATION).kind is StrategyKind.NONE
        assert AdaptationStrategy.from_action(Action.PARTIAL_SIZE).attribute is Attribute.SIZE

    def test_partial_requires_attribute(self):
        with pytest.raises(ConfigurationError):
            AdaptationStrategy(kind=StrategyKind.PARTIAL)
        with pytest.raises(ConfigurationError):
            AdaptationStrategy(kind=StrategyKind.FULL, attribute=Attribute.COLOR)


class TestShippedCatalogue:
    def test_twenty_one_entries_no_violations(self, catalogue):
        assert len(catalogue) == 21
        assert validate_catalogue(catalogue) == []

    def test_none_maps_to_empty(self, catalogue):
        for layout in Layout:
            ops = catalogue.operations(layout, AdaptationStrategy(kind=StrategyKind.NONE))
            assert ops == ()

    def test_full_superset_of_partials(self, catalogue):
        for layout in Layout:
            full = catalogue.operations(layout, AdaptationStrategy(kind=StrategyKind.FULL))
            covered = {(op.target, op.property) for op in full}
            for strategy in ALL_STRATEGIES:
                if strategy.kind is not StrategyKind.PARTIAL:
                    continue
                for op in catalogue.operations(layout, strategy):
                    assert (op.target, op.property) in covered

    def test_targets_in_shared_vocabulary(self, catalogue):
        vocab = load_selector_vocabulary()
        for (layout, _), ops in catalogue.items():
            for op in ops:
                assert op.target in vocab[layout.value]["targets"]
                assert op.property in vocab[layout.value]["properties"]


class TestValidator:
    def _docs(self, catalogue):
        docs = []
        for (layout, strategy), ops in catalogue.items():
            doc = {
                "layout": layout.value,
                "strategy": strategy.kind.value,
                "operations": [op.to_payload() for op in ops],
            }
            if strategy.attribute is not None:
                doc["attribute"] = strategy.attribute.value
            docs.append(doc)
        return docs

    def test_missing_entry_reported(self, catalogue):
        docs = [
            d for d in self._docs(catalogue)
            if not (d["layout"] == "graph" and d.get("attribute") == "color")
        ]
        violations = validate_catalogue(AdaptationCatalogue.from_documents(docs))
        assert any("missing entry" in v and "color" in v for v in violations)

    def test_none_with_operations_reported(self, catalogue):
        docs = self._docs(catalogue)
        for d in docs:
            if d["layout"] == "timeline" and d["strategy"] == "none":
                d["operations"] = [{"target": "track.all", "property": "color", "value": "#fff"}]
        violations = validate_catalogue(AdaptationCatalogue.from_documents(docs))
        assert any("no operations" in v for v in violations)

    def test_unknown_target_reported(self, catalogue):
        docs = self._docs(catalogue)
        for d in docs:
            if d["layout"] == "graph" and d.get("attribute") == "size":
                d["operations"][0]["target"] = "node.bogus"
        violations = validate_catalogue(AdaptationCatalogue.from_documents(docs))
        assert any("node.bogus" in v for v in violations)

    def test_wrong_value_type_reported(self, catalogue):
        docs = self._docs(catalogue)
        for d in docs:
            if d["layout"] == "graph" and d.get("attribute") == "size":
                d["operations"][0]["value"] = "big"
        violations = validate_catalogue(AdaptationCatalogue.from_documents(docs))
        assert any("is not float" in v for v in violations)

    def test_full_not_covering_partial_reported(self, catalogue):
        docs = self._docs(catalogue)
        for d in docs:
            if d["layout"] == "distribution" and d["strategy"] == "full":
                d["operations"] = [op for op in d["operations"] if op["property"] != "color"]
        violations = validate_catalogue(AdaptationCatalogue.from_documents(docs))
        assert any("does not cover" in v for v in violations)

    def test_duplicate_entry_rejected_at_load(self, catalogue):
        docs = self._docs(catalogue)
        docs.append(docs[0])
        with pytest.raises(ConfigurationError, match="duplicate"):
            AdaptationCatalogue.from_documents(docs)


class TestResolve:
    def test_no_adaptation_empty_operations(self, catalogue):
        for layout in Layout:
            config = resolve(layout, Action.NO_ADAPTATION, catalogue, session_id="s")
            assert config.operations == ()
            assert config.strategy.kind is StrategyKind.NONE

    def test_partial_color_on_graph(self, catalogue):
        config = resolve(Layout.GRAPH, Action.PARTIAL_COLOR, catalogue, session_id="s")
        assert len(config.operations) == 1
        op = config.operations[0]
        assert op.property == "color"
        assert op.target == "node.clique"

    def test_total_over_all_pairs(self, catalogue):
        allocator = ConfigIdAllocator("sess")
        seen_ids = set()
        for layout in Layout:
            for action in Action:
                config = resolve(
                    layout, action, catalogue, session_id="sess", allocator=allocator
                )
                assert config.config_id not in seen_ids
                seen_ids.add(config.config_id)
        assert len(seen_ids) == 21

    def test_payload_is_wire_valid(self, catalogue):
        from neuroloop.gateway import TOPIC_CONFIG, validate_payload

        for action in Action:
            config = resolve(Layout.TIMELINE, action, catalogue, session_id="s", epoch_index=4)
            validate_payload(TOPIC_CONFIG, config.to_payload())

    def test_operations_absolute_idempotent(self, catalogue):
        # same action twice -> identical operation lists (absolute assignments)
        a = resolve(Layout.GRAPH, Action.FULL_ADAPTATION, catalogue, session_id="s")
        b = resolve(Layout.GRAPH, Action.FULL_ADAPTATION, catalogue, session_id="s")
        assert [op.to_payload() for op in a.operations] == [
            op.to_payload() for op in b.operations
        ]
