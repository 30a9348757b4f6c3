"""GraphQL parser unit tests."""

import pytest

from nl2api.query_model import (
    Dialect,
    EmptySelection,
    GraphQLSyntaxError,
    MultipleOperations,
    ValueKind,
    parse_graphql,
    serialize,
)


def by_attr(query):
    return {f.attribute: f for f in query.filters}


def test_basic_query():
    q = parse_graphql("query { deals(area_min: 1000) { id } }")
    assert q.dialect is Dialect.GRAPHQL
    assert q.resource == "deals"
    assert set(by_attr(q)) == {"area_min"}
    assert q.selection == frozenset({"id"})


def test_optional_keyword_and_operation_name():
    forms = [
        "query { deals(area_min: 1000) { id } }",
        "query GetDeals { deals(area_min: 1000) { id } }",
        "{ deals(area_min: 1000) { id } }",
    ]
    parsed = [parse_graphql(t) for t in forms]
    assert parsed[0] == parsed[1] == parsed[2]


def test_whitespace_commas_and_comments_are_insignificant():
    a = parse_graphql("query { deals(a: 1, b: 2) { id name } }")
    b = parse_graphql(
        """
        # fetch deals
        query {
          deals(a: 1 b: 2) {   # args
            id,
            name
          }
        }
        """
    )
    assert a == b


def test_value_kinds_from_syntax():
    q = parse_graphql(
        'query { deals(n: 10, f: 2.50, s: "oil palm", e: CONTRACT_SIGNED, b: true, z: null) { id } }'
    )
    kinds = {a: next(iter(f.values)).kind for a, f in by_attr(q).items()}
    assert kinds["n"] is ValueKind.NUMBER
    assert kinds["f"] is ValueKind.NUMBER
    assert kinds["s"] is ValueKind.TEXT
    assert kinds["e"] is ValueKind.IDENTIFIER
    assert kinds["b"] is ValueKind.BOOLEAN
    assert kinds["z"] is ValueKind.IDENTIFIER
    assert next(iter(by_attr(q)["f"].values)).canonical == "2.5"


def test_string_escapes_decode():
    q = parse_graphql('query { deals(name: "a \\"quoted\\" name\\n\\u00e9") { id } }')
    (value,) = by_attr(q)["name"].values
    assert value.canonical == 'a "quoted" name\né'


def test_nested_object_arguments_flatten_with_dots():
    q = parse_graphql("query { deals(filters: {area_min: 1000, status: {code: 3}}) { id } }")
    assert set(by_attr(q)) == {"filters.area_min", "filters.status.code"}


def test_list_value_becomes_multivalue_filter():
    q = parse_graphql("query { deals(country_id: [104, 288]) { id } }")
    (f,) = q.filters
    assert {v.canonical for v in f.values} == {"104", "288"}


def test_list_of_objects_union_flattens():
    q = parse_graphql(
        "query { deals(filters: [{field: 1}, {field: 2, other: 3}]) { id } }"
    )
    assert {v.canonical for v in by_attr(q)["filters.field"].values} == {"1", "2"}
    assert {v.canonical for v in by_attr(q)["filters.other"].values} == {"3"}


def test_selection_reduces_to_leaf_paths():
    q = parse_graphql(
        "query { deals { id country { name region { code } } locations { point } } }"
    )
    assert q.selection == frozenset(
        {"id", "country.name", "country.region.code", "locations.point"}
    )


def test_duplicate_sibling_fields_merge():
    q = parse_graphql("query { deals { country { id } country { name } id id } }")
    assert q.selection == frozenset({"country.id", "country.name", "id"})


def test_aliases_are_dropped():
    a = parse_graphql("query { d: deals { size: area } }")
    b = parse_graphql("query { deals { area } }")
    assert a == b


def test_first_root_field_wins():
    q = parse_graphql("query { deals(a: 1) { id } investors { id } }")
    assert q.resource == "deals"
    assert set(by_attr(q)) == {"a"}


def test_nested_field_arguments_do_not_become_filters():
    q = parse_graphql("query { deals(a: 1) { locations(limit: 2) { point } } }")
    assert set(by_attr(q)) == {"a"}
    assert q.selection == frozenset({"locations.point"})


def test_unsupported_constructs_raise_syntax_errors():
    bad = {
        "mutation { createDeal { id } }": "mutation",
        "subscription { deals { id } }": "subscription",
        "fragment F on Deal { id }": "fragment",
        "query ($x: Int) { deals(a: $x) { id } }": "variable",
        "query { deals(a: $x) { id } }": "variables",
        "query { deals @include(if: true) { id } }": "directives",
        "query { ...DealFields }": "fragment spreads",
        'query { deals(s: """block""") { id } }': "block strings",
        "query { deals(x: 1e5) { id } }": "exponent",
    }
    for text, needle in bad.items():
        with pytest.raises(GraphQLSyntaxError) as err:
            parse_graphql(text)
        assert needle in str(err.value), text
        assert err.value.offset >= 0


def test_malformed_syntax_raises_with_offset():
    cases = [
        "query { deals(a: ) { id } }",
        "query { deals( ) { id } }",
        "query { deals { id }",
        "query { deals(a: 1 { id } }",
        "query deals { id } }",
        'query { deals(s: "unterminated) { id } }',
        "",
    ]
    for text in cases:
        with pytest.raises(GraphQLSyntaxError):
            parse_graphql(text)


def test_multiple_operations_rejected():
    with pytest.raises(MultipleOperations):
        parse_graphql("query A { deals { id } } query B { investors { id } }")


def test_empty_selection_rejected():
    with pytest.raises(EmptySelection):
        parse_graphql("query { deals { } }")
    with pytest.raises(EmptySelection):
        parse_graphql("query { }")
    with pytest.raises(EmptySelection):
        parse_graphql("query { deals }")


def test_serialize_canonical_rendering():
    q = parse_graphql(
        'query { deals(b: 2, a: [3, 1], s: "x y", filters: {z: true, m: LEASE}) { name id country { name } } }'
    )
    assert serialize(q) == (
        'query { deals(a: [1, 3], b: 2, filters: {m: LEASE, z: true}, s: "x y") '
        "{ country { name } id name } }"
    )


def test_round_trip_is_fixed_point():
    texts = [
        "query { deals(area_min: 1000, negotiation_status: CONTRACT_CANCELED) { id country { name } } }",
        "{ deals(country_id: [104, 288], transnational: true) { id } }",
        'query Q { d: deals(crop: "Oil Palm", filters: {year: {min: 2016}}) { locations { point } } }',
        "query { deals { id } }",
    ]
    for text in texts:
        once = parse_graphql(text)
        again = parse_graphql(serialize(once))
        assert again == once
        assert serialize(again) == serialize(once)


def test_null_round_trips_as_identifier():
    q = parse_graphql("query { deals(country: null) { id } }")
    assert serialize(q) == "query { deals(country: null) { id } }"
    assert parse_graphql(serialize(q)) == q
