"""
Opcjonalne adaptery: modele Hugging Face, Google Translate, sentence-transformers.
"""
