from .rules import ClassificationResult, RuleTable, classify_cwe, classify_description, load_rule_table
from .llm import LlmClient, LlmConfig, llm_classify, shared_client
from .classifier import MemoryClassifier, classify_cve
