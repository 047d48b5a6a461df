from .finite import FiniteGroup, GroupHom, Subgroup, is_prime, p_power_exponent
from .free import (
    FreeGroup,
    SubgroupAutomaton,
    exponent_vector_mod_p,
    is_cyclic_free_factor,
    is_injective_images,
    is_malnormal_free,
    subgroup_automaton,
)


def validate_p_group(group):
    group.validate()


def normalizer(group, subgroup):
    return group.normalizer(subgroup)


def frattini_quotient(group):
    return group.frattini_quotient()


__all__ = [
    "FiniteGroup",
    "FreeGroup",
    "GroupHom",
    "Subgroup",
    "SubgroupAutomaton",
    "exponent_vector_mod_p",
    "frattini_quotient",
    "is_cyclic_free_factor",
    "is_injective_images",
    "is_malnormal_free",
    "is_prime",
    "normalizer",
    "p_power_exponent",
    "subgroup_automaton",
    "validate_p_group",
]
