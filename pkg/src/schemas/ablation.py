from pydantic import BaseModel, Field

from src.schemas.evaluation.models import EvalReport


class VariantResult(BaseModel):
    variant: str
    strategy: str
    best_epoch: int | None = None
    report: EvalReport


class ImprovementRow(BaseModel):
    """Percent improvement of the reference model over one variant, per measure."""

    variant: str
    improvements: dict[str, float | None] = Field(..., description="(reference - variant) / variant * 100, 3 decimals")


class AblationReport(BaseModel):
    reference: str = Field(..., description="Variant the improvements are measured for")
    n: int
    results: list[VariantResult]
    improvements: list[ImprovementRow]

    def table(self) -> str:
        """Measures in percent and improvement rows, 3 decimals."""
        measures = ("recall", "precision", "ndcg", "hit_ratio")
        header = f"{'variant':<16}" + "".join(f"{name + '@' + str(self.n):>14}" for name in measures)
        lines = [header]
        for result in self.results:
            percent = result.report.percent
            lines.append(f"{result.variant:<16}" + "".join(f"{percent[name]:>14.3f}" for name in measures))
        for row in self.improvements:
            cells = [row.improvements[name] for name in measures]
            lines.append(
                f"{'Impr ' + row.variant:<16}"
                + "".join(f"{'n/a':>14}" if cell is None else f"{cell:>13.3f}%" for cell in cells)
            )
        return "\n".join(lines)
