/**
 * Console through which a teacher runs a live simulated classroom:
 * settings, the avatar grid, the chat, live suggestions, per-turn
 * annotation, and the end-of-session feedback report.
 *
 * The app renders exactly what the service returns and recomputes
 * nothing client-side; reloading mid-session and re-fetching the
 * transcript reproduces the identical view.
 */

import {
  ApiClient,
  ApiError,
  type AnnotationVerdict,
  type FeedbackReport,
  type RosterEntry,
  type SessionInfo,
  type TranscriptTurn,
} from "./api.js";
import {
  bubbleDelayMs,
  emojiFor,
  formatEvenness,
  formatScore,
  labelOptionsFor,
  verdictClass,
} from "./view.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export class ConsoleApp {
  private session: SessionInfo | null = null;
  private selected = new Set<string>();

  private settingsPane!: HTMLElement;
  private classroomPane!: HTMLElement;
  private rosterGrid!: HTMLElement;
  private chatLog!: HTMLElement;
  private chatInput!: HTMLInputElement;
  private suggestionPanel!: HTMLElement;
  private feedbackPane!: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {
    this.renderSettings();
  }

  // ---- step 1: settings -------------------------------------------------

  private renderSettings(): void {
    this.root.replaceChildren();
    this.settingsPane = el("form", "settings-pane");
    const grade = el("input", "settings-grade") as HTMLInputElement;
    grade.type = "number";
    grade.value = "7";
    const topic = el("input", "settings-topic") as HTMLInputElement;
    topic.placeholder = "Math topic";
    const description = el(
      "textarea",
      "settings-description",
    ) as HTMLTextAreaElement;
    description.placeholder = "Describe your class";
    const suggestions = el("input", "settings-suggestions") as HTMLInputElement;
    suggestions.type = "checkbox";
    suggestions.checked = true;
    const start = el("button", "settings-start", "Start class");
    start.setAttribute("type", "submit");
    const error = el("div", "settings-error");

    this.settingsPane.append(grade, topic, description, suggestions, start, error);
    this.settingsPane.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.startSession({
        grade_level: Number(grade.value),
        math_topic: topic.value,
        class_description: description.value,
        suggestions_enabled: suggestions.checked,
      });
    });
    this.root.append(this.settingsPane);
  }

  private async startSession(settings: {
    grade_level: number;
    math_topic: string;
    class_description: string;
    suggestions_enabled: boolean;
  }): Promise<void> {
    const error = this.settingsPane.querySelector(".settings-error")!;
    try {
      this.session = await this.api.createSession({ ...settings, seed: Date.now() % 100000 });
    } catch (exc) {
      if (exc instanceof ApiError) {
        error.textContent = exc.message; // 422 details shown inline
      } else {
        error.textContent = "";
        this.showRetryBanner(settings);
      }
      return;
    }
    this.renderClassroom();
  }

  private showRetryBanner(settings: {
    grade_level: number;
    math_topic: string;
    class_description: string;
    suggestions_enabled: boolean;
  }): void {
    this.settingsPane.querySelector(".retry-banner")?.remove();
    const banner = el(
      "div",
      "retry-banner",
      "The classroom service is unreachable. ",
    );
    const retry = el("button", "retry-button", "Retry");
    retry.setAttribute("type", "button");
    retry.addEventListener("click", () => void this.startSession(settings));
    banner.append(retry);
    this.settingsPane.append(banner);
  }

  // ---- step 2: live classroom ------------------------------------------

  private renderClassroom(): void {
    const session = this.session!;
    this.root.replaceChildren();
    this.classroomPane = el("div", "classroom-pane");
    this.classroomPane.dataset.sessionId = session.session_id;

    this.rosterGrid = el("div", "roster-grid");
    session.roster.forEach((entry) => this.rosterGrid.append(this.avatarCell(entry)));

    this.chatLog = el("div", "chat-log");
    const opening = el("div", "bubble bubble-teacher problem-statement");
    opening.textContent = session.problem_statement;
    this.chatLog.append(opening);

    const composer = el("form", "composer");
    this.chatInput = el("input", "chat-input") as HTMLInputElement;
    this.chatInput.placeholder = "Ask your class a question";
    const send = el("button", "chat-send", "Send");
    send.setAttribute("type", "submit");
    composer.append(this.chatInput, send);
    composer.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.sendTurn();
    });

    this.suggestionPanel = el("div", "suggestion-panel");
    const suggestButton = el("button", "suggest-button", "Get suggestion");
    suggestButton.setAttribute("type", "button");
    suggestButton.addEventListener("click", () => void this.fetchSuggestion());

    this.feedbackPane = el("div", "feedback-pane");
    const reflection = el("form", "reflection-form");
    const reflectionInput = el(
      "textarea",
      "reflection-input",
    ) as HTMLTextAreaElement;
    reflectionInput.placeholder = "What did you notice about your questioning?";
    const reflectSubmit = el("button", "reflection-submit", "Get feedback");
    reflectSubmit.setAttribute("type", "submit");
    reflection.append(reflectionInput, reflectSubmit);
    reflection.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitReflection(reflectionInput.value);
    });

    this.classroomPane.append(
      this.rosterGrid,
      this.chatLog,
      composer,
      suggestButton,
      this.suggestionPanel,
      reflection,
      this.feedbackPane,
    );
    this.root.append(this.classroomPane);
  }

  private avatarCell(entry: RosterEntry): HTMLElement {
    const cell = el("div", "avatar-cell");
    cell.dataset.profileId = entry.profile_id;
    cell.append(
      el("div", "avatar-name", entry.display_name),
      el("div", "avatar-emoji", emojiFor(entry.affect)),
    );
    const card = el("div", "profile-card hidden");
    card.append(
      el("div", "card-line", `Engagement: ${entry.engagement}`),
      el("div", "card-line", `Math: ${entry.math_level}`),
      el("div", "card-line", `Argumentation: ${entry.argumentation_level}`),
      el("div", "card-line", `Participation: ${entry.participation_pattern}`),
      el("div", "card-line", formatScore(entry.score)),
    );
    cell.append(card);
    cell.addEventListener("mouseenter", () => card.classList.remove("hidden"));
    cell.addEventListener("mouseleave", () => card.classList.add("hidden"));
    cell.addEventListener("click", () => {
      if (this.selected.has(entry.profile_id)) {
        this.selected.delete(entry.profile_id);
        cell.classList.remove("selected");
      } else {
        this.selected.add(entry.profile_id);
        cell.classList.add("selected");
      }
    });
    return cell;
  }

  private nameOf(profileId: string | null): string {
    const entry = this.session!.roster.find((r) => r.profile_id === profileId);
    return entry ? entry.display_name : "Student";
  }

  private async sendTurn(): Promise<void> {
    const text = this.chatInput.value.trim();
    if (!text || !this.session) return;
    const addressed = this.selected.size ? [...this.selected] : undefined;
    const result = await this.api.postTurn(
      this.session.session_id,
      text,
      addressed,
    );
    this.chatInput.value = "";
    this.selected.clear();
    this.rosterGrid
      .querySelectorAll(".selected")
      .forEach((cell) => cell.classList.remove("selected"));

    const transcript = await this.api.getTranscript(this.session.session_id);
    const newTurns = transcript.turns.slice(-(result.responses.length + 1));
    this.appendBubble(newTurns[0]);
    newTurns.slice(1).forEach((turn, i) => {
      const bubble = this.appendBubble(turn);
      bubble.style.animationDelay = `${bubbleDelayMs(i)}ms`;
      const response = result.responses[i];
      if (response?.degraded) {
        bubble.append(el("span", "offline-marker", "offline response"));
      }
    });

    const counter = el(
      "div",
      "respondent-count",
      `${result.responses.length} responding`,
    );
    this.chatLog.append(counter);
    this.updateAffects(result.affect);
  }

  private appendBubble(turn: TranscriptTurn): HTMLElement {
    const teacher = turn.speaker.role === "Teacher";
    const bubble = el("div", teacher ? "bubble bubble-teacher" : "bubble bubble-student");
    bubble.dataset.turnId = String(turn.turn_id);
    const who = teacher ? "You" : this.nameOf(turn.speaker.profile_id);
    bubble.append(el("span", "bubble-speaker", who), el("span", "bubble-text", turn.text));
    const annotate = el("button", "annotate-button", "Label");
    annotate.setAttribute("type", "button");
    annotate.addEventListener("click", () => this.openPicker(bubble, turn));
    bubble.append(annotate);
    this.chatLog.append(bubble);
    return bubble;
  }

  private updateAffects(affect: Record<string, string>): void {
    for (const cell of this.rosterGrid.querySelectorAll<HTMLElement>(
      ".avatar-cell",
    )) {
      const state = affect[cell.dataset.profileId ?? ""];
      if (state) {
        cell.querySelector(".avatar-emoji")!.textContent = emojiFor(
          state as never,
        );
      }
    }
  }

  private async fetchSuggestion(): Promise<void> {
    if (!this.session) return;
    this.suggestionPanel.replaceChildren();
    let suggestion;
    try {
      suggestion = await this.api.getSuggestion(this.session.session_id);
    } catch (exc) {
      const message =
        exc instanceof ApiError && exc.status === 403
          ? "Suggestions are disabled for this session."
          : `No suggestion available: ${(exc as Error).message}`;
      this.suggestionPanel.append(el("div", "suggestion-disabled", message));
      return;
    }
    this.suggestionPanel.append(
      el("div", "suggestion-reasoning", suggestion.reasoning),
    );
    for (const question of suggestion.recommended_questions) {
      const pick = el("button", "suggested-question", question);
      pick.setAttribute("type", "button");
      // click inserts the question verbatim into the composer
      pick.addEventListener("click", () => {
        this.chatInput.value = question;
      });
      this.suggestionPanel.append(pick);
    }
  }

  // ---- step 3: annotation and feedback ---------------------------------

  private openPicker(bubble: HTMLElement, turn: TranscriptTurn): void {
    bubble.querySelector(".label-picker")?.remove();
    const picker = el("form", "label-picker");
    for (const label of labelOptionsFor(turn)) {
      const option = el("label", "label-option");
      const box = el("input") as HTMLInputElement;
      box.type = "checkbox";
      box.value = label;
      option.append(box, document.createTextNode(label));
      picker.append(option);
    }
    const submit = el("button", "picker-submit", "Check");
    submit.setAttribute("type", "submit");
    picker.append(submit);
    picker.addEventListener("submit", (event) => {
      event.preventDefault();
      const labels = [
        ...picker.querySelectorAll<HTMLInputElement>("input:checked"),
      ].map((box) => box.value);
      void this.submitAnnotation(bubble, turn, labels);
    });
    bubble.append(picker);
  }

  private async submitAnnotation(
    bubble: HTMLElement,
    turn: TranscriptTurn,
    labels: string[],
  ): Promise<void> {
    if (!this.session) return;
    const verdict = await this.api.annotate(
      this.session.session_id,
      turn.turn_id,
      labels,
    );
    bubble.querySelector(".label-picker")?.remove();
    bubble.querySelector(".verdict")?.remove();
    bubble.append(this.verdictBadge(verdict));
  }

  private verdictBadge(verdict: AnnotationVerdict): HTMLElement {
    const badge = el("div", `verdict ${verdictClass(verdict.agreement)}`);
    badge.append(
      el("span", "verdict-agreement", verdict.agreement),
      el("span", "verdict-explanation", verdict.explanation),
    );
    return badge;
  }

  private async submitReflection(text: string): Promise<void> {
    if (!this.session) return;
    let report: FeedbackReport;
    try {
      report = await this.api.submitReflection(this.session.session_id, text);
    } catch (exc) {
      this.feedbackPane.replaceChildren(
        el("div", "feedback-error", (exc as Error).message),
      );
      return;
    }
    this.renderFeedback(report);
  }

  private renderFeedback(report: FeedbackReport): void {
    this.feedbackPane.replaceChildren();
    const metrics = report.session_metrics;
    const counts = el("table", "count-table");
    for (const [label, count] of [
      ...Object.entries(metrics.trqf_counts),
      ...Object.entries(metrics.toulmin_counts),
    ]) {
      const row = el("tr", "count-row");
      row.dataset.label = label;
      row.append(el("td", "count-label", label), el("td", "count-value", String(count)));
      counts.append(row);
    }
    this.feedbackPane.append(
      el(
        "div",
        "response-total",
        `${metrics.n_student_responses} student responses`,
      ),
      counts,
      el(
        "div",
        "evenness-line",
        `Question evenness ${formatEvenness(metrics.trqf_evenness)} / ` +
          `argument evenness ${formatEvenness(metrics.toulmin_evenness)}`,
      ),
    );
    const list = el("ul", "improvement-list");
    for (const suggestion of report.improvement_suggestions) {
      list.append(el("li", "improvement-item", suggestion));
    }
    this.feedbackPane.append(list);

    const followup = el("form", "followup-form");
    const input = el("input", "followup-input") as HTMLInputElement;
    input.placeholder = "Ask about your report";
    const ask = el("button", "followup-submit", "Ask");
    ask.setAttribute("type", "submit");
    followup.append(input, ask);
    followup.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.askFollowup(input.value);
    });
    this.feedbackPane.append(followup, el("div", "followup-answer"));
  }

  private async askFollowup(question: string): Promise<void> {
    if (!this.session) return;
    const { answer } = await this.api.askFollowup(
      this.session.session_id,
      question,
    );
    this.feedbackPane.querySelector(".followup-answer")!.textContent = answer;
  }
}
