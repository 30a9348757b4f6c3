"""Regenerate data/corpus.jsonl from the row table below.

Run from the repository root:

    python3 tools/build_corpus.py

The script validates every query through the shipped parsers and lints
against data/vocabulary.yaml before writing, so a bad row fails loudly
instead of landing in the corpus.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from nl2api.corpus import CorpusEntry, lint_corpus, load_corpus, load_vocabulary, save_corpus

# (id, question, rest, graphql, tags)
ROWS = [
    (
        "lm-001",
        "Which deals in Cambodia exceed 1000 hectares?",
        "/api/deals/?country_id=116&area_min=1000",
        "query { deals(country_id: 116, area_min: 1000) { id area country { name } } }",
        ["country", "area"],
    ),
    (
        "lm-002",
        "List all deals whose contracts were canceled.",
        "/api/deals/?negotiation_status=CONTRACT_CANCELED",
        "query { deals(negotiation_status: CONTRACT_CANCELED) { id negotiation_status } }",
        ["status"],
    ),
    (
        "lm-003",
        "Show deals with canceled or expired contracts.",
        "/api/deals/?negotiation_status=CONTRACT_CANCELED&negotiation_status=CONTRACT_EXPIRED",
        "query { deals(negotiation_status: [CONTRACT_CANCELED, CONTRACT_EXPIRED]) { id negotiation_status } }",
        ["status", "multi-value"],
    ),
    (
        "lm-004",
        "Which transnational deals target Indonesia?",
        "/api/deals/?transnational=true&country_id=360",
        "query { deals(transnational: true, country_id: 360) { id country { name } } }",
        ["boolean", "country"],
    ),
    (
        "lm-005",
        "Deals for biofuel production from 2010 onwards.",
        "/api/deals/?intention_of_investment=BIOFUELS&initiation_year_min=2010",
        "query { deals(intention_of_investment: BIOFUELS, initiation_year_min: 2010) { id initiation_year } }",
        ["intention", "year"],
    ),
    (
        "lm-006",
        "Oil palm deals currently in operation.",
        "/api/deals/?crops=OIL_PALM&implementation_status=IN_OPERATION",
        "query { deals(crops: OIL_PALM, implementation_status: IN_OPERATION) { id crops } }",
        ["crops", "status"],
    ),
    (
        "lm-007",
        "Give me the first 20 mining deals.",
        "/api/deals/?intention_of_investment=MINING&limit=20",
        "query { deals(intention_of_investment: MINING, limit: 20) { id } }",
        ["intention", "limit"],
    ),
    (
        "lm-008",
        "Deals between 500 and 2000 hectares.",
        "/api/deals/?area_min=500&area_max=2000",
        "query { deals(area_min: 500, area_max: 2000) { id area } }",
        ["area"],
    ),
    (
        "lm-009",
        "Which deals does investor 4405 operate?",
        "/api/deals/?investor_id=4405",
        "query { deals(investor_id: 4405) { id operating_company { id name } } }",
        ["investor"],
    ),
    (
        "lm-010",
        "List every investor in the database.",
        "/api/investors/",
        "query { investors { id name } }",
        ["investors", "no-filter"],
    ),
    (
        "lm-011",
        "Find investors named Socfin.",
        "/api/investors/?investor_name=Socfin",
        'query { investors(investor_name: "Socfin") { id name } }',
        ["investors", "name"],
    ),
    (
        "lm-012",
        "Deals located in Sierra Leone.",
        "/api/deals/?country=Sierra%20Leone",
        'query { deals(country: "Sierra Leone") { id country { name } } }',
        ["country", "text"],
    ),
    (
        "lm-013",
        "Leases that were initiated before 2000.",
        "/api/deals/?nature_of_deal=LEASE&initiation_year_max=1999",
        "query { deals(nature_of_deal: LEASE, initiation_year_max: 1999) { id initiation_year } }",
        ["nature", "year"],
    ),
    (
        "lm-014",
        "Forest concessions in region 2.",
        "/api/deals/?forest_concession=true&region_id=2",
        "query { deals(forest_concession: true, region_id: 2) { id } }",
        ["boolean", "region"],
    ),
    (
        "lm-015",
        "Deals that were abandoned or never started.",
        "/api/deals/?implementation_status=PROJECT_ABANDONED&implementation_status=PROJECT_NOT_STARTED",
        "query { deals(implementation_status: [PROJECT_ABANDONED, PROJECT_NOT_STARTED]) { id implementation_status } }",
        ["status", "multi-value"],
    ),
    (
        "lm-016",
        "Rice or cotton deals in India.",
        "/api/deals/?crops=RICE&crops=COTTON&country_id=356",
        "query { deals(crops: [RICE, COTTON], country_id: 356) { id crops } }",
        ["crops", "multi-value", "country"],
    ),
    (
        "lm-017",
        "Deals larger than 2500.5 hectares.",
        "/api/deals/?area_min=2500.5",
        "query { deals(area_min: 2500.5) { id area } }",
        ["area", "float"],
    ),
    (
        "lm-018",
        'Find the investor called Green "Gold" Holdings.',
        "/api/investors/?investor_name=Green%20%22Gold%22%20Holdings",
        'query { investors(investor_name: "Green \\"Gold\\" Holdings") { id name } }',
        ["investors", "name", "escaping"],
    ),
    (
        "lm-019",
        "Deals in Côte d'Ivoire.",
        "/api/deals/?country=C%C3%B4te%20d%27Ivoire",
        "query { deals(country: \"Côte d'Ivoire\") { id country { name } } }",
        ["country", "text"],
    ),
    (
        "lm-020",
        "Show 50 signed deals.",
        "/api/deals/?negotiation_status=CONTRACT_SIGNED&limit=50",
        "query { deals(negotiation_status: CONTRACT_SIGNED, limit: 50) { id } }",
        ["status", "limit"],
    ),
    (
        "lm-021",
        "Deals in Liberia operated by investor 4405.",
        "/api/deals/?investor_id=4405&country_id=430",
        "query { deals(operating_company: {investor_id: 4405}, country_id: 430) { id } }",
        ["investor", "nested"],
    ),
    (
        "lm-022",
        "Deals in Ghana or Togo.",
        "/api/deals/?country_id=288&country_id=768",
        "query { deals(country_id: [288, 768]) { id country { name } } }",
        ["country", "multi-value"],
    ),
    (
        "lm-023",
        "Renewable energy or industrial deals since 2018.",
        "/api/deals/?intention_of_investment=RENEWABLE_ENERGY&intention_of_investment=INDUSTRY&initiation_year_min=2018",
        "query { deals(intention_of_investment: [RENEWABLE_ENERGY, INDUSTRY], initiation_year_min: 2018) { id } }",
        ["intention", "multi-value", "year"],
    ),
    (
        "lm-024",
        "Domestic (non-transnational) deals in Brazil.",
        "/api/deals/?transnational=false&country_id=76",
        "query { deals(transnational: false, country_id: 76) { id } }",
        ["boolean", "country"],
    ),
    (
        "lm-025",
        "Concessions that are still under negotiation.",
        "/api/deals/?nature_of_deal=CONCESSION&negotiation_status=UNDER_NEGOTIATION",
        "query { deals(nature_of_deal: CONCESSION, negotiation_status: UNDER_NEGOTIATION) { id } }",
        ["nature", "status"],
    ),
    (
        "lm-026",
        "Oral agreements in region 9.",
        "/api/deals/?negotiation_status=ORAL_AGREEMENT&region_id=9",
        "query { deals(negotiation_status: ORAL_AGREEMENT, region_id: 9) { id } }",
        ["status", "region"],
    ),
    (
        "lm-027",
        "Sugar cane deals of at least 10000 hectares that are in operation.",
        "/api/deals/?crops=SUGAR_CANE&area_min=10000&implementation_status=IN_OPERATION",
        "query { deals(crops: SUGAR_CANE, area_min: 10000, implementation_status: IN_OPERATION) { id area } }",
        ["crops", "area", "status"],
    ),
    (
        "lm-028",
        "Show the profile of investor 162.",
        "/api/investors/?investor_id=162",
        "query { investors(investor_id: 162) { id name country { name } } }",
        ["investors"],
    ),
    (
        "lm-029",
        "Deals initiated exactly in 2015.",
        "/api/deals/?initiation_year_min=2015&initiation_year_max=2015",
        "query { deals(initiation_year_min: 2015, initiation_year_max: 2015) { id initiation_year } }",
        ["year"],
    ),
    (
        "lm-030",
        "Timber plantation deals where negotiations failed.",
        "/api/deals/?negotiation_status=NEGOTIATIONS_FAILED&intention_of_investment=TIMBER_PLANTATION",
        "query { deals(negotiation_status: NEGOTIATIONS_FAILED, intention_of_investment: TIMBER_PLANTATION) { id } }",
        ["status", "intention"],
    ),
    (
        "lm-031",
        "Mozambique deals at the expression of interest or MOU stage.",
        "/api/deals/?negotiation_status=EXPRESSION_OF_INTEREST&negotiation_status=MEMORANDUM_OF_UNDERSTANDING&country_id=508",
        "query { deals(negotiation_status: [EXPRESSION_OF_INTEREST, MEMORANDUM_OF_UNDERSTANDING], country_id: 508) { id } }",
        ["status", "multi-value", "country"],
    ),
    (
        "lm-032",
        "Rubber deals involving Socfin.",
        "/api/deals/?crops=RUBBER&investor_name=Socfin",
        'query { deals(crops: RUBBER, investor_name: "Socfin") { id operating_company { name } } }',
        ["crops", "name"],
    ),
    (
        "lm-033",
        "Deals of at most 300 hectares.",
        "/api/deals/?area_max=300",
        "query { deals(area_max: 300) { id area } }",
        ["area"],
    ),
    (
        "lm-034",
        "Tourism projects in the startup phase.",
        "/api/deals/?intention_of_investment=TOURISM&implementation_status=STARTUP_PHASE",
        "query { deals(intention_of_investment: TOURISM, implementation_status: STARTUP_PHASE) { id } }",
        ["intention", "status"],
    ),
    (
        "lm-035",
        "Outright purchases in region 142 since 2005.",
        "/api/deals/?nature_of_deal=OUTRIGHT_PURCHASE&region_id=142&initiation_year_min=2005",
        "query { deals(nature_of_deal: OUTRIGHT_PURCHASE, region_id: 142, initiation_year_min: 2005) { id } }",
        ["nature", "region", "year"],
    ),
    (
        "lm-036",
        "Just list the first 10 deals.",
        "/api/deals/?limit=10",
        "query { deals(limit: 10) { id } }",
        ["limit"],
    ),
    (
        "lm-037",
        "Cocoa deals in Côte d'Ivoire or Ghana.",
        "/api/deals/?crops=COCOA&country_id=384&country_id=288",
        "query { deals(crops: COCOA, country_id: [384, 288]) { id country { name } } }",
        ["crops", "country", "multi-value"],
    ),
    (
        "lm-038",
        "Which investors hold deals in Laos?",
        "/api/investors/?country_id=418",
        "query { investors(deals: {country_id: 418}) { id name } }",
        ["investors", "nested"],
    ),
    (
        "lm-039",
        "Food crop deals between 2010 and 2020 larger than 1000 hectares.",
        "/api/deals/?intention_of_investment=FOOD_CROPS&initiation_year_min=2010&initiation_year_max=2020&area_min=1000",
        "query { deals(intention_of_investment: FOOD_CROPS, initiation_year_min: 2010, initiation_year_max: 2020, area_min: 1000) { id area } }",
        ["intention", "year", "area"],
    ),
    (
        "lm-040",
        "25 transnational livestock deals in operation.",
        "/api/deals/?intention_of_investment=LIVESTOCK&transnational=true&implementation_status=IN_OPERATION&limit=25",
        "query { deals(intention_of_investment: LIVESTOCK, transnational: true, implementation_status: IN_OPERATION, limit: 25) { id } }",
        ["intention", "boolean", "status", "limit"],
    ),
]


def main() -> int:
    entries = [
        CorpusEntry(id=i, question=q, rest_query=r, graphql_query=g, tags=tuple(tags))
        for i, q, r, g, tags in ROWS
    ]
    out = ROOT / "data" / "corpus.jsonl"
    save_corpus(entries, out)

    reloaded = load_corpus(out)
    assert len(reloaded) == len(ROWS)
    vocabulary = load_vocabulary(ROOT / "data" / "vocabulary.yaml")
    warnings = lint_corpus(reloaded, vocabulary)
    for w in warnings:
        print(f"lint: {w}", file=sys.stderr)
    if warnings:
        return 1
    n_rest = sum(1 for e in reloaded if e.rest_query)
    n_gql = sum(1 for e in reloaded if e.graphql_query)
    print(f"wrote {len(reloaded)} entries ({n_rest} REST, {n_gql} GraphQL) to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
