import { ApiError, StudioClient } from "./api.js";
import { pollJob, PollOptions } from "./poll.js";
import { AnswerInput, AngleId, SessionDoc } from "./types.js";
import { AngleCard, Banner, bannerFromError, projectSession, SessionView } from "./view.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Human-origin runs are wrapped in <mark class="human">; machine text is plain. */
export function renderCardHtml(card: AngleCard): string {
  const body = card.segments
    .map((segment) =>
      segment.human
        ? `<mark class="human">${escapeHtml(segment.text)}</mark>`
        : escapeHtml(segment.text),
    )
    .join("");
  const classes = card.deleted ? "card deleted" : "card";
  return `<section class="${classes}" data-angle="${card.angle}"><h3>${escapeHtml(
    card.title,
  )}</h3><p>${body}</p></section>`;
}

/**
 * Controller for a single open session. Holds only the last fetched server
 * document; every mutation goes through the API and is followed by a refetch,
 * including on failure (no optimistic state past a failed call).
 */
export class ReviewWorkspace {
  view: SessionView | null = null;
  banner: Banner | null = null;

  constructor(
    private readonly client: StudioClient,
    private readonly sessionId: string,
    private readonly pollOptions: PollOptions = {},
  ) {}

  async refresh(): Promise<SessionView> {
    const doc = await this.client.getSession(this.sessionId);
    this.adopt(doc);
    return this.view!;
  }

  private adopt(doc: SessionDoc): void {
    this.view = projectSession(doc);
  }

  private async guarded<T>(call: () => Promise<T>): Promise<T | null> {
    this.banner = null;
    try {
      const result = await call();
      await this.refresh();
      return result;
    } catch (error) {
      if (error instanceof ApiError) {
        this.banner = bannerFromError(error);
        await this.refresh();
        return null;
      }
      throw error;
    }
  }

  paraphrase(): Promise<unknown> {
    return this.guarded(async () => {
      const jobId = await this.client.startParaphrase(this.sessionId);
      return pollJob(this.client, jobId, this.pollOptions);
    });
  }

  questions(): Promise<unknown> {
    return this.guarded(async () => {
      const jobId = await this.client.startQuestions(this.sessionId);
      return pollJob(this.client, jobId, this.pollOptions);
    });
  }

  /** Whole-text replacement; the server computes provenance. */
  saveEdit(angle: AngleId, text: string): Promise<unknown> {
    return this.guarded(() => this.client.submitReview(this.sessionId, { [angle]: text }));
  }

  saveEdits(edits: Partial<Record<AngleId, string>>): Promise<unknown> {
    return this.guarded(() =>
      this.client.submitReview(this.sessionId, edits as Record<string, string>),
    );
  }

  /** The delete button is an empty-string edit. */
  deleteSection(angle: AngleId): Promise<unknown> {
    return this.saveEdit(angle, "");
  }

  /** Accepting with no edits still advances Round1Proposed → Round1Reviewed. */
  acceptAllSections(): Promise<unknown> {
    return this.guarded(() => this.client.submitReview(this.sessionId, {}));
  }

  submitAnswers(answers: AnswerInput[]): Promise<unknown> {
    return this.guarded(() => this.client.submitAnswers(this.sessionId, answers));
  }

  finalize(): Promise<{ final_requirement: string; state: string } | null> {
    return this.guarded(() => this.client.finalize(this.sessionId));
  }

  generate(): Promise<unknown> {
    return this.guarded(async () => {
      const jobId = await this.client.startGenerate(this.sessionId);
      return pollJob(this.client, jobId, this.pollOptions);
    });
  }
}
