"""Workbench for building lemmatized corpora from page images.

Pipeline pieces: imaging (preprocess + augmentation), a from-scratch
recurrent line recognizer, character-level evaluation, transcription
conventions, a TEI-subset document model, glossary-to-lexicon lemma
alignment, skipgram embeddings and a context-aware lemmatizer, all
orchestrated by a CLI and a small review service.
"""

__version__ = "0.1.0"
