#!/usr/bin/env python3
"""Regenerate the hand-countable 12-document test corpus.

The counts the test suite relies on are asserted here at build time:
citing decisions per provision (823: 4, 280: 3, 242: 3, 812: 2), the
paragraph lengths that drive the chunk filter, and the one document without
a reasons heading.
"""

from __future__ import annotations

import json
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

_LONG = {
    "haftung": ("Die Haftung des Beklagten folgt aus der Verletzung der ihm "
                "obliegenden Verkehrssicherungspflicht, denn er hat die Gefahrenquelle "
                "geschaffen und nicht hinreichend gesichert."),
    "kausal": ("Der erforderliche Zurechnungszusammenhang zwischen der "
               "Pflichtverletzung und dem eingetretenen Schaden ist nach dem Ergebnis "
               "der Beweisaufnahme zur Überzeugung des Senats festgestellt."),
    "revision": ("Die Revision hat Erfolg, soweit das Berufungsgericht den geltend "
                 "gemachten Anspruch dem Grunde nach verneint hat; insoweit ist das "
                 "angefochtene Urteil aufzuheben und die Sache zurückzuverweisen."),
    "beweis": ("Nach den nicht angegriffenen Feststellungen des Berufungsgerichts "
               "hat der Kläger den ihm obliegenden Beweis für den Eintritt des "
               "Schadens und dessen Höhe im Ergebnis geführt."),
    "abwaegung": ("Bei der gebotenen Gesamtabwägung aller Umstände des Einzelfalls "
                  "überwiegt das Interesse des Klägers an der Durchsetzung seines "
                  "Anspruchs die schutzwürdigen Belange der Beklagtenseite deutlich."),
    "verzug": ("Der Schuldner befand sich mit der geschuldeten Leistung in Verzug, "
               "nachdem er auf die Mahnung des Gläubigers nicht innerhalb der "
               "gesetzten angemessenen Frist geleistet hat."),
    "treu": ("Der Geltendmachung des Anspruchs steht der Einwand unzulässiger "
             "Rechtsausübung entgegen, weil der Kläger durch sein eigenes Verhalten "
             "einen Vertrauenstatbestand geschaffen und über Jahre bestätigt hat."),
    "verwirkung": ("Ein Recht ist verwirkt, wenn seit der Möglichkeit seiner "
                   "Geltendmachung längere Zeit verstrichen ist und besondere Umstände "
                   "hinzutreten, die die verspätete Geltendmachung als treuwidrig "
                   "erscheinen lassen."),
    "bereicherung": ("Der Beklagte hat die Leistung ohne rechtlichen Grund erlangt, "
                     "weil der zugrunde liegende Vertrag von Anfang an nichtig war und "
                     "ein sonstiger Behaltensgrund nicht ersichtlich ist."),
    "saldo": ("Bei der Rückabwicklung gegenseitiger Verträge sind die beiderseits "
              "erlangten Vorteile nach den Grundsätzen der Saldotheorie zu "
              "verrechnen, soweit nicht Wertungsgesichtspunkte entgegenstehen."),
}

_SHORT = {
    "kosten": "Die Kostenentscheidung folgt aus § 91 ZPO.",
    "unterschrift": "Dr. Müller     Weber     Dr. Schmidt",
    "vollstreckung": "Das Urteil ist vorläufig vollstreckbar.",
}


def _doc(decision_id, decided_on, tatbestand, marker, reasons_paragraphs):
    reasons = "\n\n".join(reasons_paragraphs)
    return {
        "decision_id": decision_id,
        "court": "BGH",
        "decided_on": decided_on,
        "full_text": f"Tatbestand:\n{tatbestand}\n\n{marker}\n{reasons}",
    }


def build_documents() -> list[dict]:
    docs = [
        # 823-citing decisions (4): docs 1-4; doc 4 also cites 280.
        _doc("VI ZR 112/19", "2020-03-10",
             "Der Kläger nimmt die Beklagte aus § 823 Abs. 1 BGB auf Schadensersatz "
             "nach einem Verkehrsunfall in Anspruch.",
             "Entscheidungsgründe:",
             [_LONG["revision"], _SHORT["kosten"], _LONG["haftung"],
              _LONG["kausal"], _SHORT["unterschrift"], _LONG["beweis"],
              _LONG["abwaegung"]]),
        _doc("VI ZR 245/20", "2021-06-22",
             "Die Parteien streiten über Ansprüche aus § 823 BGB wegen der "
             "Verletzung des allgemeinen Persönlichkeitsrechts.",
             "Entscheidungsgründe:",
             [_LONG["haftung"], _SHORT["vollstreckung"], _LONG["kausal"]]),
        _doc("III ZR 62/05", "2006-05-11",
             "Gegenstand des Rechtsstreits ist ein Anspruch aus § 823 (1) BGB "
             "wegen einer Amtspflichtverletzung.",
             "Gründe:",
             [_LONG["abwaegung"], _LONG["beweis"]]),
        _doc("VIII ZR 91/18", "2019-11-05",
             "Der Kläger verlangt Schadensersatz nach §§ 280, 823 BGB wegen "
             "verspäteter und mangelhafter Leistung.",
             "Entscheidungsgründe:",
             [_LONG["verzug"], _LONG["haftung"], _LONG["revision"]]),
        # further 280-citing decisions (docs 5-6)
        _doc("VIII ZR 17/21", "2022-02-16",
             "Die Klägerin macht einen Anspruch aus § 280 Abs. 1 BGB wegen der "
             "Verletzung vertraglicher Nebenpflichten geltend.",
             "Entscheidungsgründe:",
             [_LONG["verzug"], _LONG["beweis"]]),
        _doc("XII ZR 33/16", "2017-09-27",
             "Im Streit steht ein Anspruch auf Schadensersatz aus § 280 BGB "
             "aus einem gewerblichen Mietverhältnis.",
             "Gründe:",
             [_LONG["verzug"], _SHORT["kosten"], _LONG["revision"]]),
        # 242-citing decisions (docs 7-9)
        _doc("V ZR 8/13", "2014-01-17",
             "Die Parteien streiten unter Berufung auf § 242 BGB über die "
             "Zulässigkeit der Berufung auf eine Formnichtigkeit.",
             "Entscheidungsgründe:",
             [_LONG["treu"], _LONG["verwirkung"], _LONG["abwaegung"]]),
        _doc("IX ZR 144/22", "2023-04-20",
             "Der Beklagte hält dem Anspruch den Einwand aus § 242 BGB entgegen.",
             "Entscheidungsgründe:",
             [_LONG["verwirkung"], _LONG["treu"]]),
        _doc("II ZR 76/17", "2018-07-31",
             "Streitig ist, ob die Geltendmachung der Forderung gegen § 242 BGB "
             "verstößt.",
             "Gründe:",
             [_LONG["treu"], _LONG["beweis"]]),
        # 812-citing decisions (docs 10-11)
        _doc("X ZR 50/15", "2016-10-04",
             "Die Klägerin verlangt aus § 812 Abs. 1 BGB die Herausgabe einer "
             "rechtsgrundlos erbrachten Zahlung.",
             "Entscheidungsgründe:",
             [_LONG["bereicherung"], _LONG["saldo"]]),
        _doc("IV ZR 201/19", "2020-12-09",
             "Gegenstand des Verfahrens ist ein Bereicherungsanspruch nach "
             "§ 812 BGB nach dem Widerruf des Vertrags.",
             "Gründe:",
             [_LONG["saldo"], _LONG["bereicherung"]]),
    ]
    # doc 12: cites only a provision outside the registry and carries no
    # reasons heading at all.
    docs.append({
        "decision_id": "KZR 5/14",
        "court": "BGH",
        "decided_on": "2015-03-03",
        "full_text": ("Tatbestand:\nDas Verfahren betrifft die Bindungswirkung "
                      "nach § 31 BVerfGG; Vorschriften des BGB sind nicht "
                      "Streitgegenstand.\n\nDie Revision wurde zurückgenommen."),
    })
    return docs


def check_counts(docs: list[dict]) -> None:
    short = [p for p in _SHORT.values() if len(p) >= 100]
    long_ = [p for p in _LONG.values() if len(p) < 100]
    assert not short, f"short paragraphs too long: {short}"
    assert not long_, f"long paragraphs too short: {long_}"
    assert len(docs) == 12
    # citing decisions per provision, counted over the section numbers above
    assert sum(" 823" in d["full_text"] for d in docs) == 4
    assert sum(" 280" in d["full_text"] for d in docs) == 3
    assert sum(" 242" in d["full_text"] for d in docs) == 3
    assert sum(" 812" in d["full_text"] for d in docs) == 2
    no_marker = [d for d in docs
                 if "Entscheidungsgründe" not in d["full_text"]
                 and "Gründe" not in d["full_text"]]
    assert [d["decision_id"] for d in no_marker] == ["KZR 5/14"]


def main() -> None:
    from make_demo_corpus import REGISTRY_ROWS

    docs = build_documents()
    check_counts(docs)
    corpus_dir = FIXTURES / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for i, doc in enumerate(docs, start=1):
        path = corpus_dir / f"doc{i:02d}.json"
        path.write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n",
                        encoding="utf-8")
    (FIXTURES / "provisions.json").write_text(
        json.dumps(REGISTRY_ROWS, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")
    print(f"wrote {len(docs)} documents to {corpus_dir}")


if __name__ == "__main__":
    main()
