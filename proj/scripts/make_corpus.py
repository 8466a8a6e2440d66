#!/usr/bin/env python3
"""Generate the bundled sample corpus (data/corpus.txt).

Word-level Markov chain over ~900 English word forms, ~50k tokens.
Deterministic; rerunning reproduces the same file byte-for-byte.
"""
import random

STEMS = """
time year people way day man thing woman life child world school state family
student group country problem hand part place case week company system program
question work government number night point home water room mother area money
story fact month lot right study book eye job word business issue side kind
head house service friend father power hour game line end member law car city
community name president team minute idea body information back parent face
level office door health person art war history party result change
morning reason research girl guy moment air teacher force education foot boy
age policy process music market sense nation plan college interest death
experience effect use class control care field development role effort rate
heart drug show leader light voice wife whole police mind return
street value action walk run look seem feel try leave call come think know
take see want give find tell ask play move like live believe hold bring
happen write provide sit stand lose pay meet include continue set learn
lead understand watch follow stop create speak read allow add spend
grow open win offer remember love consider appear buy wait serve die send
expect build stay fall cut reach kill remain suggest raise pass sell require
report decide pull good new first last long great little own other old big
high different small large next early young important few public bad same
able red blue green dark cold warm quiet bright slow quick deep wide narrow
strong weak soft hard clean dirty empty full heavy sharp smooth rough
near far north south east west river mountain forest stone sand snow
rain wind cloud storm fire earth metal glass paper wood leaf root branch
seed grain bread milk salt sugar fruit meal dish knife spoon table chair
window wall floor roof gate road bridge path garden stream valley hill lake
island shore wave ship boat sail anchor rope chain wheel engine tower clock
bell song dance letter page ink pen brush color shape circle square corner
edge center top bottom front rear inner outer layer surface depth
weight measure scale balance spring summer autumn winter season harvest
""".split()


def build_vocab():
    forms = []
    seen = set()
    for i, stem in enumerate(STEMS):
        cands = [stem]
        if i % 3 == 0:
            cands.append(stem + "s")
        if i % 5 == 0 and not stem.endswith("e"):
            cands.append(stem + "ed")
        if i % 7 == 0:
            cands.append(stem + "ing" if not stem.endswith("e") else stem[:-1] + "ing")
        for w in cands:
            if w not in seen:
                seen.add(w)
                forms.append(w)
    return forms


def main():
    rng = random.Random(20240817)
    vocab = build_vocab()
    n = len(vocab)
    # each word gets a handful of likely successors with uneven weights
    succ = {}
    for w in vocab:
        k = rng.randint(5, 12)
        nxt = rng.sample(vocab, k)
        weights = [rng.expovariate(1.0) + 0.05 for _ in nxt]
        total = sum(weights)
        succ[w] = (nxt, [x / total for x in weights])

    tokens = []
    cur = rng.choice(vocab)
    sentence_len = 0
    while len(tokens) < 50000:
        tokens.append(cur)
        sentence_len += 1
        if sentence_len >= rng.randint(8, 18):
            tokens.append(".")
            sentence_len = 0
            cur = rng.choice(vocab)
            continue
        nxt, wts = succ[cur]
        cur = rng.choices(nxt, weights=wts, k=1)[0]

    lines = []
    for i in range(0, len(tokens), 14):
        lines.append(" ".join(tokens[i:i + 14]))
    text = "\n".join(lines) + "\n"
    with open("data/corpus.txt", "w") as f:
        f.write(text)
    print(f"vocab forms: {n}, tokens written: {len(tokens)}")


if __name__ == "__main__":
    main()
