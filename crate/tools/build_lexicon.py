"""Regenerate crates/core/data/lexicon.txt.

Input: a hunspell .dic word list for Vietnamese (e.g. the npm package
`dictionary-vi`). Words are kept when they match an explicit table of
standard initials and rhymes, then rewritten to one canonical spelling:
modern tone placement (the glide never carries the mark) and i/y for the
open /i/ nucleus ("y" with no initial, "i" after a consonant). Spelling
variants that collapse onto the same canonical form are deduplicated.

Shares no code with the Rust tokenizer.

    python3 tools/build_lexicon.py path/to/index.dic > crates/core/data/lexicon.txt
"""
import sys
import unicodedata

TONE_MARKS = {"̀", "́", "̃", "̉", "̣"}

INITIALS = sorted(
    "b c ch d đ g gh gi h k kh l m n ng ngh nh ph q r s t th tr v x".split(),
    key=len,
    reverse=True,
)

PLAIN_RHYMES = """
a ac ach ai am an ang anh ao ap at au ay
ăc ăm ăn ăng ăp ăt
âc âm ân âng âp ât âu ây
e ec em en eng eo ep et
ê êch êm ên ênh êp êt êu
i ich im in inh ip it iu y
ia iêc iêm iên iêng iêp iêt iêu yêm yên yêng yêt yêu
o oc oi om on ong op ot ooc oong
ô ôc ôi ôm ôn ông ôp ôt
ơ ơi ơm ơn ơp ơt
u uc ui um un ung up ut
ua uôc uôi uôm uôn uông uôt
ư ưc ưi ưm ưn ưng ưt ưu
ưa ươc ươi ươm ươn ương ươp ươt ươu
""".split()

GLIDE_RHYMES = """
oa oac oach oai oam oan oang oanh oao oap oat oay
oăc oăm oăn oăng oăt
oe oen oeo oet
uê uêch uênh
uy uych uynh uyt uyu uya uyên uyêt
uân uâng uât uây
uơ
""".split()

# after "q" the glide is always written "u"
Q_RHYMES = sorted(
    {("u" + r[1:]) if r.startswith("o") else r for r in GLIDE_RHYMES}
)

STOPS = ("p", "t", "c", "ch")


def split_tone(word):
    nfd = unicodedata.normalize("NFD", word)
    marks = [c for c in nfd if c in TONE_MARKS]
    base = unicodedata.normalize("NFC", "".join(c for c in nfd if c not in TONE_MARKS))
    return base, marks


def analyse(base):
    """Split tone-free letters into (initial, rhyme, glide_len), or None."""
    for ini in INITIALS + [""]:
        if not base.startswith(ini):
            continue
        rest = base[len(ini):]
        if ini == "q":
            if rest in Q_RHYMES:
                return ini, rest, 1
            continue
        if ini == "gi" and ("i" + rest) in PLAIN_RHYMES and not rest.startswith(("a", "ê")):
            if rest == "" or rest[0] not in "aăâeêioôơuưy":
                # "gì", "gìn": the i is shared between initial and nucleus
                return "g", "i" + rest, 0
        if rest in PLAIN_RHYMES:
            return ini, rest, 0
        if rest in GLIDE_RHYMES:
            return ini, rest, 1
    return None


FINALS = ("ch", "nh", "ng", "c", "m", "n", "p", "t", "i", "y", "u", "o")


def nucleus_of(rhyme, glide):
    body = rhyme[glide:]
    for fin in FINALS:
        if body.endswith(fin) and len(body) > len(fin):
            return body[: -len(fin)]
    return body


def spell(ini, rhyme, glide, marks):
    letters = list(ini + rhyme)
    if marks:
        nucleus = nucleus_of(rhyme, glide)
        idx = 0
        for i, ch in enumerate(nucleus):
            if ch in "êôơăâư":
                idx = i
        pos = len(ini) + glide + idx
        letters[pos] = letters[pos] + marks[0]
    return unicodedata.normalize("NFC", "".join(letters))


def spelled_by_context(ini, rhyme, glide):
    """c/k, g/gh and ng/ngh are chosen by the following letter."""
    front = glide == 0 and rhyme[0] in "ieêy"
    if ini == "c":
        return not front
    if ini == "k":
        return front
    if ini == "g":
        # a "g" reaching here before i is the shared-i spelling of "gi"
        return not (glide == 0 and rhyme[0] in "eê")
    if ini in ("gh", "ngh"):
        return glide == 0 and rhyme[0] in "ieê"
    if ini == "ng":
        return not front
    return True


def canonical(word):
    """Return (placement-only respelling, canonical respelling) or None."""
    word = unicodedata.normalize("NFC", word.strip())
    if not word or not word.isalpha() or word != word.lower():
        return None
    base, marks = split_tone(word)
    if len(marks) > 1:
        return None
    found = analyse(base)
    if found is None:
        return None
    ini, rhyme, glide = found
    if rhyme.endswith(STOPS) and (not marks or marks[0] not in ("\u0301", "\u0323")):
        return None
    if not spelled_by_context(ini, rhyme, glide):
        return None
    placed = spell(ini, rhyme, glide, marks)
    if rhyme in ("i", "y") and ini != "g":
        rhyme = "y" if ini == "" else "i"
    return placed, spell(ini, rhyme, glide, marks)


def main(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")[1:]
    pairs = [canonical(line.split("/")[0]) for line in lines]
    pairs = [p for p in pairs if p is not None]
    attested = {placed for placed, _ in pairs}
    # keep a canonical spelling only when it is itself attested
    out = sorted({canon for _, canon in pairs if canon in attested})
    sys.stdout.write("\n".join(out) + "\n")
    print(f"{len(out)} syllables", file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1])
