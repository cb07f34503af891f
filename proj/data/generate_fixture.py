#!/usr/bin/env python3
"""Writes the synthetic evaluation fixture under data/synthetic/.

The world below is authored by hand. Gold answers are recomputed by a
brute-force scan over the triples, and every program in the oracle table is
checked against them before anything is written.
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent / "synthetic"

PEOPLE = ["Alice", "Bob", "Carol", "Dave", "Erin", "Frank", "Grace", "Heidi",
          "Ivan", "Judy", "Mallory", "Niaj", "Olivia", "Peggy", "Rupert", "Sybil"]
CITY_COUNTRY = {
    "Amsterdam": "Netherlands", "Berlin": "Germany", "Cairo": "Egypt", "Dublin": "Ireland",
    "Edinburgh": "Scotland", "Florence": "Italy", "Geneva": "Switzerland", "Helsinki": "Finland",
    "Istanbul": "Turkey", "Jakarta": "Indonesia", "Kyoto": "Japan", "Lisbon": "Portugal",
}
COMPANY_HQ = {"Acme Corp": "Berlin", "Globex": "Geneva", "Initech": "Dublin",
              "Umbrella": "Kyoto", "Hooli": "Lisbon", "Vandelay": "Cairo"}
UNIVERSITY_CITY = {"Oxford University": "Edinburgh", "MIT": "Amsterdam",
                   "ETH Zurich": "Geneva", "Kyoto University": "Kyoto"}
SPOUSES = [("Alice", "Bob"), ("Carol", "Dave"), ("Erin", "Frank"), ("Grace", "Heidi"),
           ("Ivan", "Judy"), ("Mallory", "Niaj"), ("Olivia", "Peggy")]
# person: (born_in, lives_in, works_for, studied_at)
PERSON = {
    "Alice": ("Amsterdam", "Berlin", "Acme Corp", "MIT"),
    "Bob": ("Cairo", "Berlin", "Globex", "Oxford University"),
    "Carol": ("Dublin", "Dublin", "Initech", "ETH Zurich"),
    "Dave": ("Edinburgh", "Geneva", "Umbrella", "Kyoto University"),
    "Erin": ("Florence", "Lisbon", "Hooli", "MIT"),
    "Frank": ("Geneva", "Lisbon", "Vandelay", "ETH Zurich"),
    "Grace": ("Helsinki", "Kyoto", "Acme Corp", "Oxford University"),
    "Heidi": ("Istanbul", "Cairo", "Globex", "Kyoto University"),
    "Ivan": ("Jakarta", "Amsterdam", "Initech", "MIT"),
    "Judy": ("Kyoto", "Amsterdam", "Umbrella", "Oxford University"),
    "Mallory": ("Lisbon", "Helsinki", "Hooli", "ETH Zurich"),
    "Niaj": ("Amsterdam", "Istanbul", "Vandelay", "Kyoto University"),
    "Olivia": ("Berlin", "Jakarta", "Acme Corp", "MIT"),
    "Peggy": ("Cairo", "Florence", "Initech", "Oxford University"),
    "Rupert": ("Dublin", "Geneva", "Globex", "ETH Zurich"),
    "Sybil": ("Edinburgh", "Kyoto", "Hooli", "Kyoto University"),
}


def build_triples():
    t = set()
    for a, b in SPOUSES:
        t.add((a, "spouse", b))
        t.add((b, "spouse", a))
    for p, (born, lives, works, studied) in PERSON.items():
        t.add((p, "born_in", born))
        t.add((p, "lives_in", lives))
        t.add((p, "works_for", works))
        t.add((p, "studied_at", studied))
    for c, country in CITY_COUNTRY.items():
        t.add((c, "located_in", country))
    for co, city in COMPANY_HQ.items():
        t.add((co, "headquartered_in", city))
    for u, city in UNIVERSITY_CITY.items():
        t.add((u, "university_in", city))
    return sorted(t)


TRIPLES = build_triples()


def objects(s, r):
    return sorted({o for (a, b, o) in TRIPLES if a == s and b == r})


def subjects(r, o):
    return sorted({s for (s, b, c) in TRIPLES if b == r and c == o})


def q(text):
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def brute_program(steps):
    """Evaluates a program given as (opcode, args) by linear scans."""
    work, regs, evidence = [], {}, set()
    for op, *args in steps:
        if op == "START":
            work = [args[0]] if any(args[0] in (s, o) for s, _, o in TRIPLES) else []
        elif op == "FOLLOW":
            hits = [(s, r, o) for (s, r, o) in TRIPLES if s in work and r == args[0]]
            evidence.update(hits)
            work = sorted({o for _, _, o in hits})
        elif op == "FOLLOW_INV":
            hits = [(s, r, o) for (s, r, o) in TRIPLES if o in work and r == args[0]]
            evidence.update(hits)
            work = sorted({s for s, _, _ in hits})
        elif op == "FILTER_HAS":
            hits = [(s, r, o) for (s, r, o) in TRIPLES if s in work and r == args[0] and o == args[1]]
            evidence.update(hits)
            work = sorted({s for s, _, _ in hits})
        elif op == "SAVE":
            regs[args[0]] = list(work)
        elif op == "INTERSECT":
            work = sorted(set(work) & set(regs[args[0]]))
        elif op == "RETURN":
            return work, sorted(evidence)
    raise AssertionError("program without RETURN")


def render(steps):
    parts = []
    for op, *args in steps:
        parts.append(op + ("(" + ", ".join(q(a) for a in args) + ")" if args else ""))
    return "; ".join(parts) + ";"


# Each question: (id, question, [sub-problems]) where a sub-problem is
# (sid, template, deps, program_builder(dep_answers) -> steps).
def one_hop(person):
    return [("s1", f"Who is the spouse of {person}?", [], lambda d: [("START", person), ("FOLLOW", "spouse"), ("RETURN",)])]


def spouse_birthplace(person):
    return [
        ("s1", f"Who is the spouse of {person}?", [], lambda d: [("START", person), ("FOLLOW", "spouse"), ("RETURN",)]),
        ("s2", "Where was {s1} born?", ["s1"], lambda d: [("START", d["s1"][0]), ("FOLLOW", "born_in"), ("RETURN",)]),
    ]


def birth_country(person):
    return [("s1", f"In which country was {person} born?", [],
             lambda d: [("START", person), ("FOLLOW", "born_in"), ("FOLLOW", "located_in"), ("RETURN",)])]


def employer_country(person):
    return [
        ("s1", f"Which company does {person} work for?", [],
         lambda d: [("START", person), ("FOLLOW", "works_for"), ("RETURN",)]),
        ("s2", "In which country is {s1} headquartered?", ["s1"],
         lambda d: [("START", d["s1"][0]), ("FOLLOW", "headquartered_in"), ("FOLLOW", "located_in"), ("RETURN",)]),
    ]


def colleague_in_city(company, city):
    return [("s1", f"Who works for {company} and lives in {city}?", [],
             lambda d: [("START", company), ("FOLLOW_INV", "works_for"), ("FILTER_HAS", "lives_in", city), ("RETURN",)])]


def spouse_university_city(person):
    return [
        ("s1", f"Who is the spouse of {person}?", [], lambda d: [("START", person), ("FOLLOW", "spouse"), ("RETURN",)]),
        ("s2", "Which university did {s1} attend?", ["s1"],
         lambda d: [("START", d["s1"][0]), ("FOLLOW", "studied_at"), ("RETURN",)]),
        ("s3", "In which city is {s2} located?", ["s2"],
         lambda d: [("START", d["s2"][0]), ("FOLLOW", "university_in"), ("RETURN",)]),
    ]


def born_where_lives(person):
    return [("s1", f"Who was born in the city where {person} lives?", [],
             lambda d: [("START", person), ("FOLLOW", "lives_in"), ("FOLLOW_INV", "born_in"), ("RETURN",)])]


def same_city_and_school(city, university):
    return [("s1", f"Who was born in {city} and studied at {university}?", [],
             lambda d: [("START", city), ("FOLLOW_INV", "born_in"), ("SAVE", "born"),
                        ("START", university), ("FOLLOW_INV", "studied_at"), ("INTERSECT", "born"), ("RETURN",)])]


QUESTIONS = [
    ("q01", "Who is the spouse of Alice?", one_hop("Alice")),
    ("q02", "Who is the spouse of Carol?", one_hop("Carol")),
    ("q03", "Who is the spouse of Grace?", one_hop("Grace")),
    ("q04", "Where was the spouse of Erin born?", spouse_birthplace("Erin")),
    ("q05", "Where was the spouse of Ivan born?", spouse_birthplace("Ivan")),
    ("q06", "Where was the spouse of Mallory born?", spouse_birthplace("Mallory")),
    ("q07", "Where was the spouse of Olivia born?", spouse_birthplace("Olivia")),
    ("q08", "In which country was Bob born?", birth_country("Bob")),
    ("q09", "In which country was Dave born?", birth_country("Dave")),
    ("q10", "In which country was Heidi born?", birth_country("Heidi")),
    ("q11", "In which country was Rupert born?", birth_country("Rupert")),
    ("q12", "In which country is the employer of Frank headquartered?", employer_country("Frank")),
    ("q13", "In which country is the employer of Judy headquartered?", employer_country("Judy")),
    ("q14", "In which country is the employer of Sybil headquartered?", employer_country("Sybil")),
    ("q15", "In which country is the employer of Peggy headquartered?", employer_country("Peggy")),
    ("q16", "Who works for Acme Corp and lives in Berlin?", colleague_in_city("Acme Corp", "Berlin")),
    ("q17", "Who works for Hooli and lives in Lisbon?", colleague_in_city("Hooli", "Lisbon")),
    ("q18", "Who works for Initech and lives in Amsterdam?", colleague_in_city("Initech", "Amsterdam")),
    ("q19", "Who works for Globex and lives in Cairo?", colleague_in_city("Globex", "Cairo")),
    ("q20", "In which city is the university attended by the spouse of Bob located?", spouse_university_city("Bob")),
    ("q21", "In which city is the university attended by the spouse of Dave located?", spouse_university_city("Dave")),
    ("q22", "In which city is the university attended by the spouse of Heidi located?", spouse_university_city("Heidi")),
    ("q23", "In which city is the university attended by the spouse of Niaj located?", spouse_university_city("Niaj")),
    ("q24", "Who was born in the city where Judy lives?", born_where_lives("Judy")),
    ("q25", "Who was born in the city where Peggy lives?", born_where_lives("Peggy")),
    ("q26", "Who was born in the city where Heidi lives?", born_where_lives("Heidi")),
    ("q27", "Who was born in the city where Olivia lives?", born_where_lives("Olivia")),
    ("q28", "Who was born in Amsterdam and studied at MIT?", same_city_and_school("Amsterdam", "MIT")),
    ("q29", "Who was born in Edinburgh and studied at Kyoto University?", same_city_and_school("Edinburgh", "Kyoto University")),
    ("q30", "Who was born in Cairo and studied at Oxford University?", same_city_and_school("Cairo", "Oxford University")),
]

# Two extra phrasings for ten questions; all three share one plan.
PARAPHRASES = {
    "q01": ["Alice is married to whom?", "Name Alice's spouse."],
    "q04": ["Erin's spouse was born in which city?", "What is the birthplace of the person Erin married?"],
    "q08": ["Bob was born in what country?", "Which nation is Bob's country of birth?"],
    "q12": ["Frank's employer has its headquarters in which country?", "Where, by country, is the company Frank works for based?"],
    "q16": ["Which Acme Corp employee lives in Berlin?", "Name the person living in Berlin who is employed by Acme Corp."],
    "q20": ["The spouse of Bob went to a university in which city?", "Bob's spouse studied at a university located where?"],
    "q24": ["Whose birthplace is the city Judy lives in?", "Judy lives in a city; who was born there?"],
    "q28": ["Which MIT alumni were born in Amsterdam?", "Name people born in Amsterdam who attended MIT."],
    "q13": ["Judy's employer is headquartered in what country?", "Which country hosts the headquarters of Judy's company?"],
    "q29": ["Who studied at Kyoto University and was born in Edinburgh?", "Name Kyoto University alumni born in Edinburgh."],
}

CITIES = sorted(CITY_COUNTRY)
COUNTRIES = sorted(set(CITY_COUNTRY.values()))


def fence(program):
    return "```kgql\n" + program + "\n```"


def claim_lines(evidence):
    return "".join(f"CLAIM: {s} | {r} | {o}\n" for s, r, o in evidence)


def wrong_answer(gold, pool):
    for candidate in pool:
        if candidate not in gold:
            return candidate
    raise AssertionError("no wrong answer available")


def pool_for(answer):
    if answer in PERSON:
        return PEOPLE
    if answer in CITY_COUNTRY:
        return CITIES
    if answer in COUNTRIES:
        return COUNTRIES
    return sorted(COMPANY_HQ)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    entities = {s for s, _, o in TRIPLES} | {o for s, _, o in TRIPLES}
    assert len(entities) == 50, len(entities)

    with open(OUT / "graph.tsv", "w") as f:
        f.write("# synthetic fixture: 16 people, 12 cities, 12 countries, 6 companies, 4 universities\n")
        for s, r, o in TRIPLES:
            f.write(f"{s}\t{r}\t{o}\n")

    oracle = {"decompose": {}, "program": {}, "answer": {}, "default_reply": "I do not know."}
    adversarial = {"decompose": {}, "program": {}, "answer": {}, "default_reply": "I do not know."}
    fabricated = []
    records = []

    for index, (qid, question, subs) in enumerate(QUESTIONS):
        answers = {}
        plan = {"subproblems": []}
        terminal = subs[-1][0]
        fabricate = index % 2 == 1
        for sid, template, deps, build in subs:
            plan["subproblems"].append({"id": sid, "question": template, "depends_on": deps,
                                        "expected_kind": "entity-set"})
            key = template
            for d in deps:
                key = key.replace("{" + d + "}", ", ".join(answers[d]))
            steps = build(answers)
            result, evidence = brute_program(steps)
            assert result, (qid, sid)
            answers[sid] = result
            program = render(steps)
            honest_answer = claim_lines(evidence) + "ANSWER: " + ", ".join(result)
            honest_program = fence(program) + "\n" + honest_answer

            for table in (oracle, adversarial):
                assert table["program"].get(key, honest_program) == honest_program, key
            oracle["program"][key] = honest_program
            oracle["answer"][key] = honest_answer

            if fabricate and sid == terminal:
                wrong = wrong_answer(result, pool_for(result[0]))
                subject, relation, _ = evidence[-1]
                fake = (subject, relation, wrong)
                assert fake not in TRIPLES
                fabricated.append(list(fake))
                adversarial["answer"][key] = f"CLAIM: {subject} | {relation} | {wrong}\nANSWER: {wrong}"
                adversarial["program"][key] = fence(program) + f"\nCLAIM: {subject} | {relation} | {wrong}\nANSWER: " + ", ".join(result)
            else:
                assert key not in adversarial["answer"] or adversarial["answer"][key] == honest_answer, key
                adversarial["answer"][key] = honest_answer
                adversarial["program"][key] = honest_program

        gold = answers[terminal]
        plan_reply = "```json\n" + json.dumps(plan) + "\n```"
        phrasings = [question] + PARAPHRASES.get(qid, [])
        for phrasing in phrasings:
            oracle["decompose"][phrasing] = plan_reply
            adversarial["decompose"][phrasing] = plan_reply
        records.append({"id": qid, "question": question, "answers": gold, "phrasings": phrasings})

    with open(OUT / "questions.jsonl", "w") as f:
        for r in records:
            f.write(json.dumps({"id": r["id"], "question": r["question"], "answers": r["answers"]}) + "\n")

    with open(OUT / "paraphrase.jsonl", "w") as f:
        for r in records:
            if len(r["phrasings"]) != 3:
                continue
            for tag, phrasing in zip("abc", r["phrasings"]):
                f.write(json.dumps({"id": f"{r['id']}-{tag}", "question": phrasing, "answers": r["answers"]}) + "\n")

    with open(OUT / "oracle.json", "w") as f:
        json.dump(oracle, f, indent=1, sort_keys=True)
        f.write("\n")
    with open(OUT / "adversarial.json", "w") as f:
        json.dump(adversarial, f, indent=1, sort_keys=True)
        f.write("\n")
    with open(OUT / "fabricated_claims.json", "w") as f:
        json.dump(fabricated, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
