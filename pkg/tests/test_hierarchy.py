import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lascl.errors import (
    DepthOutOfRange,
    DuplicateClass,
    EmptyPath,
    LeafCollision,
    PrefixConflict,
    UnknownClass,
    UnresolvedPlaceholder,
)
from lascl.hierarchy import (
    TemplateSpec,
    ancestor_at_depth,
    ancestor_path,
    build_tree,
    label_sentence,
    truncate_bottom_up,
)

HARDWARE = ["Computer", "System", "IBM", "PC", "Hardware"]
NEWS = [
    (0, ["recreation", "sport", "hockey"]),
    (1, ["recreation", "sport", "baseball"]),
    (2, HARDWARE),
    (3, ["Computer", "System", "Mac", "Hardware"]),
    (4, ["science"]),
]


@pytest.fixture
def news_tree():
    return build_tree(NEWS)


class TestBuildTree:
    def test_shared_prefix(self):
        tree = build_tree(NEWS[:2])
        assert len(tree.nodes) == 1 + 2 + 2
        root = tree.nodes[tree.root_id]
        assert root.parent is None and root.depth == 0
        assert [n.name for n in tree.nodes if n.parent == root.id] == ["recreation"]
        l0, l1 = tree.leaf(0), tree.leaf(1)
        assert l0.depth == l1.depth == 3
        assert l0.parent == l1.parent
        assert tree.nodes[l0.parent].name == "sport"

    def test_single_leaf(self):
        tree = build_tree([(0, ["science"])])
        assert tree.leaf(0).depth == 1
        assert tree.leaf(0).parent == tree.root_id

    def test_deep_leaf(self, news_tree):
        leaf = news_tree.leaf(2)
        assert leaf.name == "Hardware" and leaf.depth == 5
        assert ancestor_path(news_tree, 2)[:-1] == ["Computer", "System", "IBM", "PC"]

    def test_depths_follow_parents(self, news_tree):
        for node in news_tree.nodes:
            if node.parent is not None:
                assert node.depth == news_tree.nodes[node.parent].depth + 1

    def test_names_are_case_sensitive(self):
        tree = build_tree([(0, ["A", "x"]), (1, ["a", "x"])])
        assert tree.leaf(0).parent != tree.leaf(1).parent

    @pytest.mark.parametrize(
        "paths, error",
        [
            ([], EmptyPath),
            ([(0, [])], EmptyPath),
            ([(0, ["a"]), (0, ["b"])], DuplicateClass),
            ([(0, ["a"]), (2, ["b"])], DuplicateClass),
            ([(0, ["a"]), (1, ["a", "b"])], PrefixConflict),
            ([(0, ["a", "b", "c"]), (1, ["a", "b"])], PrefixConflict),
            ([(0, ["a", "b"]), (1, ["a", "b"])], LeafCollision),
        ],
    )
    def test_errors(self, paths, error):
        with pytest.raises(error):
            build_tree(paths)


class TestAncestors:
    def test_path(self, news_tree):
        assert ancestor_path(news_tree, 2) == HARDWARE
        assert ancestor_path(news_tree, 4) == ["science"]

    def test_unknown_class(self, news_tree):
        with pytest.raises(UnknownClass):
            ancestor_path(news_tree, 5)

    def test_at_depth(self, news_tree):
        leaf = news_tree.leaf(2)
        assert ancestor_at_depth(news_tree, 2, 5) == leaf.id
        assert ancestor_at_depth(news_tree, 2, 4) == leaf.parent
        assert news_tree.nodes[ancestor_at_depth(news_tree, 2, 1)].name == "Computer"

    @pytest.mark.parametrize("depth", [0, 6])
    def test_depth_out_of_range(self, news_tree, depth):
        with pytest.raises(DepthOutOfRange):
            ancestor_at_depth(news_tree, 2, depth)


class TestLabelSentence:
    def test_full_path(self, news_tree):
        s = label_sentence(news_tree, 0, TemplateSpec("It contains {label} news."))
        assert s == "It contains recreation, sport, hockey news."

    def test_layer_fields(self):
        tree = build_tree([(0, ["Place", "Village"])])
        tmpl = TemplateSpec("It contains {label[L2]} under {label[L1]} category.")
        assert label_sentence(tree, 0, tmpl) == "It contains Village under Place category."

    def test_override(self, news_tree):
        tmpl = TemplateSpec("{label[L9]}")
        assert label_sentence(news_tree, 1, tmpl, {1: "custom description"}) == "custom description"

    def test_unresolved_layer(self, news_tree):
        with pytest.raises(UnresolvedPlaceholder):
            label_sentence(news_tree, 4, TemplateSpec("{label[L2]}"))

    def test_unknown_placeholder(self, news_tree):
        with pytest.raises(UnresolvedPlaceholder):
            label_sentence(news_tree, 0, TemplateSpec("{name}"))

    def test_twenty_distinct_sentences(self):
        paths = [(c, [f"top{c % 6}", f"mid{c % 3}", f"leaf{c}"]) for c in range(20)]
        tree = build_tree(paths)
        tmpl = TemplateSpec("It contains {label} news.")
        assert len({label_sentence(tree, c, tmpl) for c in range(20)}) == 20


class TestTruncate:
    def test_no_op_when_deep_enough(self, news_tree):
        assert truncate_bottom_up(news_tree, 5).paths() == news_tree.paths()
        assert truncate_bottom_up(news_tree, 9).paths() == news_tree.paths()

    def test_flat(self, news_tree):
        flat = truncate_bottom_up(build_tree(NEWS[:3]), 1)
        assert flat.paths() == [["hockey"], ["baseball"], ["Hardware"]]
        assert all(flat.leaf(c).depth == 1 for c in range(flat.num_classes))

    def test_two_levels(self, news_tree):
        assert ancestor_path(truncate_bottom_up(news_tree, 2), 2) == ["PC", "Hardware"]

    def test_collision(self, news_tree):
        # classes 2 and 3 both end in "Hardware"
        with pytest.raises(LeafCollision):
            truncate_bottom_up(news_tree, 1)

    def test_invalid_levels(self, news_tree):
        with pytest.raises(ValueError):
            truncate_bottom_up(news_tree, 0)


# --- properties ----------------------------------------------------------

names = st.sampled_from(list("abcdef"))


@st.composite
def taxonomies(draw):
    """Random trees given as class-ordered paths; leaves get unique names."""
    n = draw(st.integers(1, 8))
    paths = []
    for c in range(n):
        prefix = draw(st.lists(names, max_size=4))
        paths.append(prefix + [f"leaf{c}"])
    return paths


@settings(max_examples=200, deadline=None)
@given(taxonomies())
def test_round_trip(paths):
    tree = build_tree(enumerate(paths))
    assert tree.paths() == paths


@settings(max_examples=200, deadline=None)
@given(taxonomies(), st.integers(1, 6), st.integers(1, 6))
def test_truncation_composes(paths, a, b):
    tree = build_tree(enumerate(paths))
    twice = truncate_bottom_up(truncate_bottom_up(tree, a), b)
    assert twice.paths() == truncate_bottom_up(tree, min(a, b)).paths()
    for c, p in enumerate(paths):
        assert len(ancestor_path(twice, c)) == min(min(a, b), len(p))


@settings(max_examples=100, deadline=None)
@given(taxonomies())
def test_ancestor_chain_reaches_root(paths):
    tree = build_tree(enumerate(paths))
    for c in range(tree.num_classes):
        for depth in range(1, tree.leaf(c).depth + 1):
            node = tree.nodes[ancestor_at_depth(tree, c, depth)]
            assert node.depth == depth
            while node.parent is not None:
                node = tree.nodes[node.parent]
            assert node.id == tree.root_id


@settings(max_examples=50, deadline=None)
@given(taxonomies())
def test_label_sentence_is_pure(paths):
    tree = build_tree(enumerate(paths))
    tmpl = TemplateSpec("x {label} y")
    first = [label_sentence(tree, c, tmpl) for c in range(tree.num_classes)]
    assert first == [label_sentence(tree, c, tmpl) for c in range(tree.num_classes)]
    assert first == ["x " + ", ".join(p) + " y" for p in paths]
