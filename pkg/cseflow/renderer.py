from typing import TYPE_CHECKING, Any, Dict

if TYPE_CHECKING:
    from .engine import PlanStage, WorkflowPlan


def escape_string(s: str) -> str:
    """Escape special characters in DOT strings; newlines become DOT line breaks."""
    s = str(s)
    s = s.replace("\\", "\\\\")
    s = s.replace('"', '\\"')
    s = s.replace("\n", "\\n")
    return s


def format_attrs(attrs: Dict[str, Any]) -> str:
    """Format attributes as DOT attribute string."""
    if not attrs:
        return ""
    parts = []
    for key, value in attrs.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        parts.append(f'{key}="{escape_string(value)}"')
    return f"[{', '.join(parts)}]"


def node_id(stage: "PlanStage") -> str:
    return f"stage{stage.index}"


def render_stage(stage: "PlanStage", indent: str = "  ") -> str:
    realization = stage.realization
    label = (
        f"{stage.manifest.id} {stage.manifest.version}\n"
        f"level {int(realization.level)} ({realization.kind.value})"
    )
    attrs = {"label": label}
    if stage.manifest.title:
        attrs["tooltip"] = stage.manifest.title
    return f'{indent}"{node_id(stage)}" {format_attrs(attrs)};'


def plan_to_dot(plan: "WorkflowPlan") -> str:
    """Render a composed plan as a DOT digraph, one node per stage, one edge per binding."""
    lines = [f'digraph "{escape_string(plan.title)}" {{']
    lines.append('  rankdir="LR";')
    lines.append('  node [shape="box", style="rounded"];')

    by_definition = {stage.stage: stage for stage in plan.stages}
    for stage in plan.stages:
        lines.append(render_stage(stage))
    for edge in plan.edges:
        source = by_definition[edge.producer_stage]
        target = by_definition[edge.consumer_stage]
        attrs = format_attrs({"label": f"{edge.output_port} -> {edge.input_port}"})
        lines.append(f'  "{node_id(source)}" -> "{node_id(target)}" {attrs};')

    lines.append("}")
    return "\n".join(lines) + "\n"
