"""Prediction/gold pairs with hand-pinned Exact Match labels (containment mode)."""

from __future__ import annotations

IRCA = "The Immigration Reform and Control Act (IRCA) was passed on November 6, 1986."
ANGOLA = "Angola achieved independence from Portugal in 1975."
BOSTON = "Boston College is the private research university located in Chestnut Hill, Massachusetts."
BRAUNEK = (
    'The mother of the director of the film "Polish-Russian War (Wojna polsko-ruska)" is actress '
    "Małgorzata Braunek."
)
SNOOP = (
    "No, Snoop Dogg did not refuse to make music with rival gang members, as evidenced by his collaboration "
    'with The Game on the song "California Vacation."'
)
PORTUGAL_GOLDS = ["Portogało", "Republic of Portugal"]

EM_FIXTURES: list[tuple[str, list[str], bool]] = [
    # worked examples
    (IRCA, ["November 6, 1986"], True),
    (ANGOLA, PORTUGAL_GOLDS, False),
    (BOSTON, ["Boston College"], True),
    (BRAUNEK, ["Magorzata Braunek"], False),
    (SNOOP, ["false"], False),
    # normalisation
    ("november 6, 1986", ["November 6, 1986"], True),
    ("1987", ["November 6, 1986"], False),
    ("  Paris  ", ["paris"], True),
    ("The Beatles", ["Beatles"], True),
    ("An apple", ["apple"], True),
    ("It’s “Nirvana”", ["Nirvana"], True),
    ("1,986", ["1986"], True),
    ("Yes", ["yes"], True),
    ("Małgorzata Braunek", ["Małgorzata Braunek"], True),
    # containment is whole-word only
    ("pineapple", ["apple"], False),
    ("Bostonian College", ["Boston College"], False),
    ("Paris, France", ["Paris"], True),
    ("the Republic of Portugal.", PORTUGAL_GOLDS, True),
    ("Portugal", PORTUGAL_GOLDS, False),
    # misses
    ("France", ["Paris"], False),
    ("unknown", ["Paris"], False),
    ("", ["Paris"], False),
]

STRICT_FIXTURES: list[tuple[str, list[str], bool]] = [
    (IRCA, ["November 6, 1986"], False),
    ("november 6 1986", ["November 6, 1986"], True),
    ("Paris, France", ["Paris"], False),
    ("The Beatles!", ["beatles"], True),
]
