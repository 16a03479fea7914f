"""Court-decision corpora in, citation-grounded commentary drafts out.

The pipeline ingests decision documents, extracts and chunks the reasons
section, derives <keyword, summary, embedding> records per statutory
provision, clusters them by keyword similarity, generates section drafts and
merged commentaries, and scores the result with a five-criterion rubric judge
plus deterministic citation-resolution checks.
"""

__version__ = "0.1.0"
