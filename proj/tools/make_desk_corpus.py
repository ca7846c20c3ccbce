#!/usr/bin/env python3
"""Generate the bundled desk corpus and minimal-pair file.

The corpus is produced by a seeded probabilistic grammar over four domains
(stories, wiki, dialogue, literature). Every byte is a pure function of the
seed, so the files under data/ can be regenerated exactly:

    python3 tools/make_desk_corpus.py --out data/

Output:
    desk_corpus.tsv      one paragraph per line: <domain>\t<text>
    minimal_pairs.tsv    one pair per line: <acceptable>\t<unacceptable>
"""

import argparse
import os
import random

SEED = 20240611

ONSETS = ["b", "br", "c", "ch", "d", "dr", "f", "fl", "g", "gr", "h", "j", "k", "l",
          "m", "n", "p", "pl", "r", "s", "sh", "st", "t", "th", "tr", "v", "w", "z"]
VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "io", "ou", "y"]
CODAS = ["", "", "", "n", "l", "r", "s", "th", "m", "nd", "rk", "x", "ck", "ld"]


def pseudo_word(rng, syllables):
    parts = []
    for _ in range(syllables):
        parts.append(rng.choice(ONSETS) + rng.choice(VOWELS) + rng.choice(CODAS))
    return "".join(parts)


def unique_words(rng, count, min_syl, max_syl, suffixes=("",)):
    out, seen = [], set()
    while len(out) < count:
        w = pseudo_word(rng, rng.randint(min_syl, max_syl)) + rng.choice(suffixes)
        if w not in seen and len(w) > 2:
            seen.add(w)
            out.append(w)
    return out


# Nouns: (singular, plural)
ANIMALS = [("dog", "dogs"), ("cat", "cats"), ("bird", "birds"), ("fox", "foxes"),
           ("rabbit", "rabbits"), ("bear", "bears"), ("mouse", "mice"), ("duck", "ducks"),
           ("frog", "frogs"), ("horse", "horses"), ("owl", "owls"), ("lion", "lions"),
           ("puppy", "puppies"), ("kitten", "kittens"), ("turtle", "turtles"), ("sheep", "sheep"),
           ("squirrel", "squirrels"), ("pig", "pigs"), ("cow", "cows"), ("goat", "goats"),
           ("bunny", "bunnies"), ("deer", "deer"), ("wolf", "wolves"), ("bee", "bees")]
PEOPLE = [("girl", "girls"), ("boy", "boys"), ("man", "men"), ("woman", "women"),
          ("child", "children"), ("teacher", "teachers"), ("farmer", "farmers"),
          ("doctor", "doctors"), ("king", "kings"), ("queen", "queens"), ("baker", "bakers"),
          ("sailor", "sailors"), ("friend", "friends"), ("neighbor", "neighbors"),
          ("soldier", "soldiers"), ("student", "students"), ("painter", "painters"),
          ("driver", "drivers"), ("writer", "writers"), ("captain", "captains")]
THINGS = [("ball", "balls"), ("box", "boxes"), ("tree", "trees"), ("flower", "flowers"),
          ("book", "books"), ("cake", "cakes"), ("toy", "toys"), ("hat", "hats"),
          ("apple", "apples"), ("kite", "kites"), ("boat", "boats"), ("stone", "stones"),
          ("cup", "cups"), ("door", "doors"), ("star", "stars"), ("shell", "shells"),
          ("key", "keys"), ("letter", "letters"), ("lamp", "lamps"), ("coin", "coins"),
          ("bridge", "bridges"), ("road", "roads"), ("river", "rivers"), ("window", "windows")]
PLACES = ["park", "forest", "garden", "house", "school", "river", "beach", "hill",
          "village", "kitchen", "field", "town", "castle", "market", "lake", "farm",
          "valley", "library", "harbor", "meadow", "station", "mountain", "island", "bakery"]
ADJS = ["little", "big", "happy", "sad", "red", "blue", "green", "old", "young", "tiny",
        "brave", "kind", "shy", "quiet", "bright", "dark", "warm", "cold", "funny", "small",
        "gentle", "clever", "tall", "shiny", "soft", "strong", "lazy", "busy", "curious", "wise"]
# Verbs: (base/plural present, 3sg present, past, ing)
VERBS = [("run", "runs", "ran", "running"), ("jump", "jumps", "jumped", "jumping"),
         ("play", "plays", "played", "playing"), ("sing", "sings", "sang", "singing"),
         ("walk", "walks", "walked", "walking"), ("swim", "swims", "swam", "swimming"),
         ("dance", "dances", "danced", "dancing"), ("read", "reads", "read", "reading"),
         ("climb", "climbs", "climbed", "climbing"), ("laugh", "laughs", "laughed", "laughing"),
         ("sleep", "sleeps", "slept", "sleeping"), ("eat", "eats", "ate", "eating"),
         ("rest", "rests", "rested", "resting"), ("wait", "waits", "waited", "waiting"),
         ("work", "works", "worked", "working"), ("hide", "hides", "hid", "hiding"),
         ("fly", "flies", "flew", "flying"), ("look", "looks", "looked", "looking"),
         ("talk", "talks", "talked", "talking"), ("listen", "listens", "listened", "listening")]
TVERBS = [("find", "finds", "found"), ("see", "sees", "saw"), ("like", "likes", "liked"),
          ("want", "wants", "wanted"), ("take", "takes", "took"), ("need", "needs", "needed"),
          ("love", "loves", "loved"), ("make", "makes", "made"), ("hold", "holds", "held"),
          ("carry", "carries", "carried"), ("build", "builds", "built"), ("paint", "paints", "painted"),
          ("keep", "keeps", "kept"), ("share", "shares", "shared"), ("open", "opens", "opened")]
FEELINGS = ["happy", "sad", "scared", "excited", "tired", "proud", "angry", "surprised",
            "worried", "calm", "glad", "lonely", "hungry", "sleepy", "thankful"]
COLORS = ["red", "blue", "green", "yellow", "white", "black", "brown", "purple", "orange", "gray"]
TIMES = ["One day", "One morning", "Later that day", "The next day", "That night",
         "In the afternoon", "After lunch", "Before dinner", "On Sunday", "In the spring",
         "Every evening", "Soon", "Then", "After a while", "At last"]


class Lexicon:
    def __init__(self, rng):
        self.names = [w.capitalize() for w in unique_words(rng, 2400, 1, 3)]
        self.surnames = [w.capitalize() for w in unique_words(rng, 1800, 2, 3, ("", "son", "ley", "ton", "ford"))]
        self.towns = [w.capitalize() for w in unique_words(rng, 1600, 2, 3, ("", "ville", "burg", "ton", "ford", "mouth", "dale"))]
        self.countries = [w.capitalize() for w in unique_words(rng, 160, 2, 3, ("ia", "land", "stan", "a", ""))]
        self.rivers = [w.capitalize() for w in unique_words(rng, 400, 2, 3)]
        self.species = unique_words(rng, 900, 2, 4, ("us", "a", "um", "is", "ia"))
        self.crafts = unique_words(rng, 500, 2, 3, ("ing", "ery", "craft", "work"))


def sg_pl(rng, nouns):
    noun = rng.choice(nouns)
    plural = rng.random() < 0.4
    return noun, plural


def det_phrase(rng, noun, plural, adj=True):
    word = noun[1] if plural else noun[0]
    if adj and rng.random() < 0.5:
        word = rng.choice(ADJS) + " " + word
    if plural:
        det = rng.choice(["the", "the", "some", "two", "many", "three"])
    else:
        det = rng.choice(["the", "the", "a", "one", "that", "this"])
        if det == "a" and word[0] in "aeiou":
            det = "an"
    return det + " " + word


def cap(s):
    return s[0].upper() + s[1:]


# ---------------------------------------------------------------- stories

def story_sentence(rng, lex, hero, hero_kind):
    r = rng.random()
    if r < 0.14:
        return f"{hero} liked to {rng.choice(VERBS)[0]} in the {rng.choice(PLACES)}."
    if r < 0.26:
        n, pl = sg_pl(rng, THINGS)
        return f"{rng.choice(TIMES)}, {hero} {rng.choice(TVERBS)[2]} {det_phrase(rng, n, pl)} near the {rng.choice(PLACES)}."
    if r < 0.38:
        return f"{hero} felt {rng.choice(FEELINGS)} and {rng.choice(VERBS)[2]} all day."
    if r < 0.52:
        n, pl = sg_pl(rng, ANIMALS + PEOPLE)
        subj = det_phrase(rng, n, pl)
        v = rng.choice(VERBS)
        if rng.random() < 0.5:
            return f"{cap(subj)} {'were' if pl else 'was'} {v[3]} in the {rng.choice(PLACES)}."
        return f"{cap(subj)} {v[0] if pl else v[1]} in the {rng.choice(PLACES)} every day."
    if r < 0.62:
        friend = rng.choice(lex.names)
        return f"{hero} met a {rng.choice(ADJS)} {rng.choice(ANIMALS)[0]} named {friend}, and they became good friends."
    if r < 0.72:
        n, pl = sg_pl(rng, THINGS)
        thing = n[1] if pl else n[0]
        return f"\"Look at the {rng.choice(COLORS)} {thing}!\" said {hero}. \"{'They are' if pl else 'It is'} so {rng.choice(ADJS)}.\""
    if r < 0.82:
        n, pl = sg_pl(rng, PEOPLE)
        subj = det_phrase(rng, n, pl, adj=False)
        return f"{cap(subj)} {'have' if pl else 'has'} a {rng.choice(ADJS)} {rng.choice(THINGS)[0]} and {'share' if pl else 'shares'} it with {hero}."
    if r < 0.91:
        return f"{hero} wanted to {rng.choice(TVERBS)[0]} the {rng.choice(THINGS)[0]}, but it was too {rng.choice(['high', 'far', 'heavy', 'big', 'small'])}."
    return f"{hero} was {rng.choice(FEELINGS)} because the {rng.choice(ADJS)} {rng.choice(ANIMALS)[0]} came back."


def story_paragraph(rng, lex):
    hero = rng.choice(lex.names)
    kind = rng.choice(ANIMALS + PEOPLE)[0]
    opener = rng.choice([
        f"Once upon a time, there was a {rng.choice(ADJS)} {kind} named {hero}.",
        f"{hero} was a {rng.choice(ADJS)} {kind} who lived near the {rng.choice(PLACES)}.",
        f"In a {rng.choice(ADJS)} {rng.choice(PLACES)} far away, a {kind} named {hero} lived with {rng.choice(['her', 'his'])} family.",
        f"{rng.choice(TIMES)}, a {rng.choice(ADJS)} {kind} called {hero} woke up early.",
    ])
    body = [story_sentence(rng, lex, hero, kind) for _ in range(rng.randint(5, 11))]
    closer = rng.choice([
        f"From that day on, {hero} was never {rng.choice(FEELINGS)} again.",
        f"{hero} smiled and went home.",
        f"The end.",
        f"And {hero} learned that it is good to be {rng.choice(ADJS)}.",
    ])
    return " ".join([opener] + body + [closer])


# ---------------------------------------------------------------- wiki

def wiki_paragraph(rng, lex):
    kind = rng.random()
    if kind < 0.4:
        town = rng.choice(lex.towns)
        country = rng.choice(lex.countries)
        pop = rng.randint(300, 990000)
        year = rng.randint(1050, 1990)
        s = [f"{town} is a {rng.choice(['town', 'city', 'village', 'municipality'])} in {country}."]
        s.append(f"It has a population of {pop} people.")
        s.append(f"The {rng.choice(['town', 'city', 'settlement'])} was founded in {year}.")
        if rng.random() < 0.7:
            s.append(f"It lies on the {rng.choice(lex.rivers)} River, {rng.randint(2, 250)} kilometres from the capital.")
        if rng.random() < 0.6:
            s.append(f"The main industries are {rng.choice(lex.crafts)} and {rng.choice(['farming', 'fishing', 'tourism', 'mining', 'trade'])}.")
        if rng.random() < 0.5:
            n, pl = sg_pl(rng, THINGS)
            s.append(f"The {n[1] if pl else n[0]} of {town} {'are' if pl else 'is'} famous in the region.")
        s.append(f"In {rng.randint(year + 1, 2020)}, {town} {rng.choice(['became', 'was made', 'was named'])} the capital of the {rng.choice(['district', 'province', 'county', 'region'])}.")
        return " ".join(s)
    if kind < 0.7:
        sp = rng.choice(lex.species)
        genus = sp.capitalize()
        an = rng.choice(ANIMALS)
        s = [f"{genus} is a genus of {rng.choice(['small', 'large', 'medium-sized', 'rare', 'common'])} {an[1]} found in {rng.choice(lex.countries)}."]
        s.append(f"There are {rng.randint(2, 60)} known species.")
        s.append(f"These animals {rng.choice(['live', 'feed', 'nest', 'rest'])} in {rng.choice(['forests', 'rivers', 'mountains', 'grasslands', 'deserts', 'wetlands'])}.")
        s.append(f"An adult {an[0]} of this genus {rng.choice(['weighs', 'measures'])} about {rng.randint(1, 400)} {rng.choice(['grams', 'kilograms', 'centimetres'])}.")
        if rng.random() < 0.6:
            s.append(f"The genus was first described by {rng.choice(lex.names)} {rng.choice(lex.surnames)} in {rng.randint(1750, 2015)}.")
        if rng.random() < 0.5:
            s.append(f"Most species {rng.choice(['are', 'were'])} active at {rng.choice(['night', 'dawn', 'dusk', 'midday'])}.")
        return " ".join(s)
    first, last = rng.choice(lex.names), rng.choice(lex.surnames)
    born = rng.randint(1700, 1990)
    job = rng.choice(PEOPLE)[0]
    s = [f"{first} {last} (born {born}) is a {rng.choice(['famous', 'well known', 'retired', 'young'])} {job} from {rng.choice(lex.towns)}."]
    s.append(f"{'She' if rng.random() < 0.5 else 'He'} studied at the University of {rng.choice(lex.towns)} from {born + 18} to {born + 22}.")
    s.append(f"{last} is best known for {rng.choice(['the book', 'the song', 'the painting', 'the bridge', 'the film'])} \"{rng.choice(THINGS)[0].capitalize()} of {rng.choice(lex.towns)}\".")
    if rng.random() < 0.6:
        s.append(f"In {born + rng.randint(25, 60)}, {last} received the {rng.choice(lex.surnames)} Prize.")
    if rng.random() < 0.5:
        s.append(f"{last} has {rng.randint(1, 6)} children and lives in {rng.choice(lex.countries)}.")
    return " ".join(s)


# ---------------------------------------------------------------- dialogue

QUESTIONS = ["Where are you going?", "What are you doing here?", "Did you see that?",
             "Are you okay?", "Who told you that?", "Can you help me?", "What happened?",
             "Why did you do that?", "Is it true?", "Do you want some tea?", "Where is it?",
             "How long have you been here?", "What time is it?", "Are they coming?"]
ANSWERS = ["I don't know.", "Yes, I think so.", "No, not really.", "Maybe later.",
           "I told you already.", "Leave me alone.", "It's fine.", "Thank you.",
           "I'm sorry.", "Of course.", "Not now.", "Come on.", "Let's go.", "Wait here."]


def dialogue_line(rng, lex):
    r = rng.random()
    if r < 0.25:
        return rng.choice(QUESTIONS)
    if r < 0.5:
        return rng.choice(ANSWERS)
    if r < 0.62:
        return f"I'm going to the {rng.choice(PLACES)}."
    if r < 0.72:
        return f"{rng.choice(lex.names)}, {rng.choice(['come here', 'listen to me', 'look at this', 'wait for me', 'stop it'])}!"
    if r < 0.82:
        n, pl = sg_pl(rng, PEOPLE + ANIMALS)
        w = n[1] if pl else n[0]
        return f"The {w} {'are' if pl else 'is'} {rng.choice(['here', 'gone', 'outside', 'late', 'ready', 'asleep'])}."
    if r < 0.9:
        return f"We have {rng.randint(2, 90)} minutes before the {rng.choice(['train', 'show', 'storm', 'party', 'meeting'])}."
    return f"Did you {rng.choice(TVERBS)[0]} the {rng.choice(THINGS)[0]}?"


def dialogue_paragraph(rng, lex):
    return " ".join("- " + dialogue_line(rng, lex) for _ in range(rng.randint(3, 8)))


# ---------------------------------------------------------------- literature

CONNECT = ["and", "but", "for", "yet", "so"]


def lit_paragraph(rng, lex):
    name = f"{rng.choice(['Mr.', 'Mrs.', 'Miss', 'Captain', 'Dr.', 'Lady', 'Sir'])} {rng.choice(lex.surnames)}"
    s = [rng.choice([
        f"It was a {rng.choice(['dark', 'cold', 'quiet', 'long', 'grey', 'bright'])} {rng.choice(['evening', 'morning', 'winter', 'summer', 'night'])} when {name} arrived at {rng.choice(lex.towns)}.",
        f"{name} had long been known in {rng.choice(lex.towns)} as a person of {rng.choice(['great', 'little', 'uncommon', 'doubtful'])} {rng.choice(['fortune', 'temper', 'virtue', 'learning', 'courage'])}.",
        f"Of all the {rng.choice(['houses', 'families', 'streets', 'roads'])} in {rng.choice(lex.towns)}, none was more {rng.choice(ADJS)} than that of {name}.",
    ])]
    for _ in range(rng.randint(3, 7)):
        r = rng.random()
        n, pl = sg_pl(rng, PEOPLE)
        subj = det_phrase(rng, n, pl, adj=True)
        if r < 0.3:
            s.append(f"{cap(subj)} {'were' if pl else 'was'} {rng.choice(['standing', 'sitting', 'waiting', 'weeping', 'laughing'])} by the {rng.choice(['fire', 'window', 'gate', 'door', 'stair'])}, {rng.choice(CONNECT)} {name} did not {rng.choice(['speak', 'move', 'look up', 'answer'])}.")
        elif r < 0.55:
            s.append(f"\"I {rng.choice(['must', 'shall', 'cannot', 'will not'])} {rng.choice(TVERBS)[0]} the {rng.choice(THINGS)[0]},\" said {name}, \"for it {rng.choice(['belongs', 'was given', 'was promised'])} to {rng.choice(lex.names)}.\"")
        elif r < 0.75:
            s.append(f"The {rng.choice(['wind', 'rain', 'snow', 'sun', 'sea'])} {rng.choice(['beat', 'fell', 'shone', 'moved'])} upon the {rng.choice(THINGS)[1]}, and the {rng.choice(PEOPLE)[1]} of the {rng.choice(PLACES)} {rng.choice(['were', 'grew', 'became'])} {rng.choice(FEELINGS)}.")
        else:
            s.append(f"{cap(subj)} {'have' if pl else 'has'} {rng.choice(['never', 'often', 'seldom', 'always'])} {rng.choice(['seen', 'known', 'heard', 'loved'])} such a {rng.choice(ADJS)} {rng.choice(THINGS)[0]}, {rng.choice(['said', 'thought', 'whispered'])} {name}.")
    return " ".join(s)


# ---------------------------------------------------------------- minimal pairs

def minimal_pair(rng, lex):
    r = rng.random()
    if r < 0.35:
        n, _ = sg_pl(rng, ANIMALS + PEOPLE)
        v = rng.choice(VERBS)
        place = rng.choice(PLACES)
        if rng.random() < 0.5:
            return (f"The {n[0]} {v[1]} in the {place} every day.", f"The {n[0]} {v[0]} in the {place} every day.")
        return (f"The {n[1]} {v[0]} in the {place} every day.", f"The {n[1]} {v[1]} in the {place} every day.")
    if r < 0.65:
        n, _ = sg_pl(rng, ANIMALS + PEOPLE)
        v = rng.choice(VERBS)[3]
        place = rng.choice(PLACES)
        if rng.random() < 0.5:
            return (f"The {n[0]} was {v} in the {place}.", f"The {n[0]} were {v} in the {place}.")
        return (f"The {n[1]} were {v} in the {place}.", f"The {n[1]} was {v} in the {place}.")
    if r < 0.85:
        n, _ = sg_pl(rng, PEOPLE + ANIMALS)
        if rng.random() < 0.5:
            return (f"The {n[0]} is here.", f"The {n[0]} are here.")
        return (f"The {n[1]} are here.", f"The {n[1]} is here.")
    name = rng.choice(lex.names)
    v = rng.choice(VERBS)
    place = rng.choice(PLACES)
    return (f"{name} liked to {v[0]} in the {place}.", f"{name} liked to {v[1]} in the {place}.")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--paragraphs", type=int, default=4000, help="paragraphs per domain")
    ap.add_argument("--pairs", type=int, default=2000)
    args = ap.parse_args()

    rng = random.Random(SEED)
    lex = Lexicon(rng)
    makers = {"stories": story_paragraph, "wiki": wiki_paragraph,
              "dialogue": dialogue_paragraph, "literature": lit_paragraph}
    scale = {"stories": 1.0, "wiki": 1.3, "dialogue": 2.2, "literature": 1.1}
    rows = []
    for domain, make in makers.items():
        for _ in range(int(args.paragraphs * scale[domain])):
            rows.append((domain, make(rng, lex)))
    rng.shuffle(rows)

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "desk_corpus.tsv"), "w", encoding="utf-8", newline="\n") as f:
        for domain, text in rows:
            f.write(f"{domain}\t{text}\n")
    with open(os.path.join(args.out, "minimal_pairs.tsv"), "w", encoding="utf-8", newline="\n") as f:
        seen = set()
        while len(seen) < args.pairs:
            good, bad = minimal_pair(rng, lex)
            if (good, bad) in seen:
                continue
            seen.add((good, bad))
            f.write(f"{good}\t{bad}\n")


if __name__ == "__main__":
    main()
