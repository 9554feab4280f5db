from .scores import (DiscreteLabel, PromptResponseParser, SentimentScore, map_discrete, parse_label,
                     parse_prompt_response, to_signed, wrap_continuous)
from .providers import InlineScoreProvider, OracleProvider, SentimentProvider, build_provider, score_news

__all__ = ['DiscreteLabel', 'PromptResponseParser', 'SentimentScore', 'map_discrete', 'parse_label',
           'parse_prompt_response', 'to_signed', 'wrap_continuous', 'InlineScoreProvider', 'OracleProvider',
           'SentimentProvider', 'build_provider', 'score_news']
