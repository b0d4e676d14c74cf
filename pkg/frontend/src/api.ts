/**
 * Typed client for the session service HTTP API.
 *
 * The UI holds no authoritative state: every number or label it renders
 * comes out of one of these calls.
 */

export type EmojiState =
  | "Neutral"
  | "Happy"
  | "Curious"
  | "Confused"
  | "Thinking";

export const TRQF_LABELS = ["Epistemic", "Teleological", "Communicative"] as const;
export const TOULMIN_LABELS = [
  "Claim",
  "Data",
  "Warrant",
  "Backing",
  "Qualifier",
  "Rebuttal",
] as const;

export type TrqfLabel = (typeof TRQF_LABELS)[number];
export type ToulminLabel = (typeof TOULMIN_LABELS)[number];

export interface RosterEntry {
  profile_id: string;
  display_name: string;
  participation_pattern: string;
  engagement: string;
  math_level: string;
  argumentation_level: string;
  typical_utterances: string[];
  source_lesson: string;
  affect: EmojiState;
  score: number;
}

export interface SessionInfo {
  session_id: string;
  problem_statement: string;
  suggestions_enabled: boolean;
  roster: RosterEntry[];
}

export interface StudentResponse {
  profile_id: string;
  text: string;
  affect: EmojiState;
  degraded: boolean;
}

export interface TurnResult {
  responses: StudentResponse[];
  affect: Record<string, EmojiState>;
}

export interface Suggestion {
  reasoning: string;
  recommended_questions: string[];
}

export interface TranscriptTurn {
  turn_id: number;
  speaker: { role: "Teacher" | "Student"; profile_id: string | null };
  text: string;
  affect: EmojiState | null;
  trqf_labels: string[];
  toulmin_labels: string[];
}

export interface Transcript {
  session_id: string;
  problem_statement: string;
  turns: TranscriptTurn[];
}

export type Agreement = "Match" | "Partial" | "Mismatch";

export interface AnnotationVerdict {
  turn_id: number;
  user_labels: string[];
  system_labels: string[];
  agreement: Agreement;
  explanation: string;
}

export interface SessionMetrics {
  n_student_responses: number;
  trqf_counts: Record<string, number>;
  toulmin_counts: Record<string, number>;
  trqf_evenness: number | null;
  toulmin_evenness: number | null;
}

export interface FeedbackReport {
  session_metrics: SessionMetrics;
  improvement_suggestions: string[];
  self_reflection: string;
}

export interface SessionSettings {
  grade_level: number;
  math_topic: string;
  class_description: string;
  seed?: number;
  roster_size?: number;
  suggestions_enabled?: boolean;
}

/** Error carrying the HTTP status so the view can branch on 403/404/422. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (body.detail) detail = String(body.detail);
    } catch {
      // keep the status-only message
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  healthz(): Promise<{ status: string; backend: string }> {
    return request(`${this.baseUrl}/healthz`);
  }

  createSession(settings: SessionSettings): Promise<SessionInfo> {
    const { grade_level, math_topic, class_description, ...rest } = settings;
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify({
        context: { grade_level, math_topic, class_description },
        ...rest,
      }),
    });
  }

  postTurn(
    sessionId: string,
    text: string,
    addressed?: string[],
  ): Promise<TurnResult> {
    return request(`${this.baseUrl}/sessions/${sessionId}/turns`, {
      method: "POST",
      body: JSON.stringify({ text, addressed: addressed ?? null }),
    });
  }

  getSuggestion(sessionId: string): Promise<Suggestion> {
    return request(`${this.baseUrl}/sessions/${sessionId}/suggestion`);
  }

  getTranscript(sessionId: string): Promise<Transcript> {
    return request(`${this.baseUrl}/sessions/${sessionId}/transcript`);
  }

  annotate(
    sessionId: string,
    turnId: number,
    labels: string[],
  ): Promise<AnnotationVerdict> {
    return request(`${this.baseUrl}/sessions/${sessionId}/annotations`, {
      method: "POST",
      body: JSON.stringify({ turn_id: turnId, labels }),
    });
  }

  submitReflection(sessionId: string, text: string): Promise<FeedbackReport> {
    return request(`${this.baseUrl}/sessions/${sessionId}/reflection`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  askFollowup(sessionId: string, question: string): Promise<{ answer: string }> {
    return request(`${this.baseUrl}/sessions/${sessionId}/reflection/followups`, {
      method: "POST",
      body: JSON.stringify({ question }),
    });
  }

  getMetrics(sessionId: string): Promise<SessionMetrics> {
    return request(`${this.baseUrl}/sessions/${sessionId}/metrics`);
  }
}
