"""Test configuration and shared fixtures.

Word fixtures follow the "Louis Alexandre MOUDEL" fragment (the father of the bride:
two first names and a family name). The two-record page mirrors a published civil
registry annotation with its A, B and C blocks.
"""

import pytest

from tagrec.functions.syngen import GenConfig, generate_page
from tagrec.models.document import Block, Page, RecordD, Word
from tagrec.models.ontology import TagOntology, canonical_label, default_ontology

# ---------------------------------------------------------------------------
# Layout fixture (one record per line, the canonical serialization)
# ---------------------------------------------------------------------------

APPENDIX_PAGE = (
    "<D><A>595 Jegou et Boulin</A>"
    "<B>Le vingt Février mil neuf cent vingt, seize heures devant [...] époux et nous "
    "Alphonse Louis Malètre maire-adjoint du dix-septième arrondissement de Paris</B>"
    "<C>680. Mariage dissous par Jugement de divorce rendu le [...] Le Maire</C></D>\n"
    "<D><A>787 Delagarde et Meslé</A>"
    "<B>L'an mil huit cent quatre vingt-dix le quatre novembre à dix, [...] le père de "
    "l'épouse et Nous, après lecture.</B>"
    "<C>Approuvé la rature de quinze mots nuls.</C></D>"
)

# Same page as printed, blocks broken across lines
APPENDIX_PAGE_WRAPPED = """<D><A>595 Jegou et Boulin</A>
<B>Le vingt Février mil neuf cent vingt, seize heures devant
[...] époux et nous Alphonse Louis Malètre maire-adjoint du
dix-septième arrondissement de Paris</B>
<C>680. Mariage dissous par Jugement de divorce rendu le
[...] Le Maire</C></D>
<D><A>787 Delagarde et Meslé</A>
<B>L'an mil huit cent quatre vingt-dix le quatre novembre
à dix, [...] le père de l'épouse et Nous, après lecture.</B>
<C>Approuvé la rature de quinze mots nuls.</C></D>
"""


# ---------------------------------------------------------------------------
# Shared Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def ont() -> TagOntology:
    """The built-in 24-tag ontology."""
    return default_ontology()


@pytest.fixture
def label(ont):
    """Build a canonical label from tag names."""

    def _label(*names: str):
        return canonical_label(names, ont)

    return _label


@pytest.fixture
def tok(ont):
    """Serialized token of a tag, by name."""

    def _tok(name: str) -> str:
        return ont.tag(name).token

    return _tok


@pytest.fixture
def moudel_words(label) -> list[Word]:
    """Louis Alexandre (wife, father, first_name) MOUDEL (wife, father, family_name)."""
    first = label("wife", "father", "first_name")
    family = label("wife", "father", "family_name")
    return [Word("Louis", first), Word("Alexandre", first), Word("MOUDEL", family)]


@pytest.fixture
def moudel_page(moudel_words) -> Page:
    """One record with the MOUDEL fragment in its body."""
    a = Block("A", (Word("595"), Word("Jegou"), Word("et"), Word("Boulin")))
    b = Block("B", (Word("et"), *moudel_words, Word("cultivateur")))
    c = (Block("C", (Word("Approuvé"), Word("la"), Word("rature"))),)
    return Page("moudel", (RecordD(a, b, c),))


@pytest.fixture(scope="session")
def generated_pages() -> list[Page]:
    """A small batch of synthetic pages with every slot labeled."""
    cfg = GenConfig(seed=11)
    return [generate_page(cfg, index=i) for i in range(8)]


@pytest.fixture
def straddling_page(label) -> Page:
    """Two records where the bride's first name ends record 1 and starts record 2."""
    marie = Word("Marie", label("wife", "first_name"))
    first = RecordD(Block("A", (Word("12"),)), Block("B", (Word("épouse"), marie)))
    second = RecordD(Block("A", (marie, Word("Meslé"))), Block("B"))
    return Page("straddle", (first, second))
