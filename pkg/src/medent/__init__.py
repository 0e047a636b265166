"""Maximum-entropy Markov model for disease risk prediction from ICD-10 histories."""

__version__ = "0.1.0"
